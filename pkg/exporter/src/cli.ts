#!/usr/bin/env node
/** starft-export: write a STARFT01 feature file from an export manifest. */

import { parseArgs } from "node:util";

import { exportFeatures } from "./export.js";

const USAGE = `usage: starft-export --manifest m.json --out feats.starft
  [--frames 8] [--llm-endpoint URL] [--llm-model ID]
  [--template "describe the phases of [CLS]"] [--cache descriptors.json]`;

export async function main(argv: string[]): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        manifest: { type: "string" },
        out: { type: "string" },
        frames: { type: "string", default: "8" },
        "llm-endpoint": { type: "string" },
        "llm-model": { type: "string" },
        template: { type: "string" },
        cache: { type: "string" },
        help: { type: "boolean", default: false },
      },
    }));
  } catch (err) {
    console.error(`${err}\n${USAGE}`);
    return 2;
  }
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (!values.manifest || !values.out) {
    console.error(`--manifest and --out are required\n${USAGE}`);
    return 2;
  }
  const frames = Number(values.frames);
  if (!Number.isInteger(frames) || frames < 1) {
    console.error(`--frames must be a positive integer, got ${values.frames}`);
    return 2;
  }

  try {
    const bytes = await exportFeatures({
      manifestPath: values.manifest,
      outPath: values.out,
      framesPerVideo: frames,
      descriptors: {
        endpoint: values["llm-endpoint"],
        modelId: values["llm-model"],
        template: values.template,
        cachePath: values.cache,
      },
    });
    console.log(`wrote ${values.out} (${bytes.length} bytes)`);
    return 0;
  } catch (err) {
    console.error(`export failed: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const entry = process.argv[1];
if (entry && import.meta.url.endsWith(entry.split("/").pop()!)) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
