/** Export manifest parsing and validation. */

import { readFileSync } from "node:fs";
import { z } from "zod";

const videoSchema = z
  .object({
    class: z.string().min(1),
    /** Pre-extracted frame vectors, one row per source frame. */
    features: z.array(z.array(z.number()).nonempty()).nonempty().optional(),
    /** Path to a JSON file holding the same row layout. */
    path: z.string().min(1).optional(),
  })
  .refine((v) => (v.features === undefined) !== (v.path === undefined), {
    message: "each video needs exactly one of 'features' or 'path'",
  });

const manifestSchema = z
  .object({
    classes: z.array(z.string().min(1)).optional(),
    encoder: z.enum(["passthrough", "bytes-hash"]).default("passthrough"),
    dim: z.number().int().positive().optional(),
    videos: z.array(videoSchema).nonempty(),
  })
  .strict();

export type ManifestVideo = z.infer<typeof videoSchema>;
export type Manifest = z.infer<typeof manifestSchema>;

export function parseManifest(raw: unknown): Manifest {
  const manifest = manifestSchema.parse(raw);
  if (manifest.classes) {
    const seen = new Set<string>();
    for (const name of manifest.classes) {
      if (seen.has(name)) {
        throw new Error(`duplicate class name ${JSON.stringify(name)}`);
      }
      seen.add(name);
    }
    for (const video of manifest.videos) {
      if (!seen.has(video.class)) {
        throw new Error(
          `video references unlisted class ${JSON.stringify(video.class)}`,
        );
      }
    }
  }
  return manifest;
}

export function loadManifest(path: string): Manifest {
  return parseManifest(JSON.parse(readFileSync(path, "utf-8")));
}

/** Class names in declaration order (explicit list or first appearance). */
export function classNames(manifest: Manifest): string[] {
  if (manifest.classes) return [...manifest.classes];
  const names: string[] = [];
  for (const video of manifest.videos) {
    if (!names.includes(video.class)) names.push(video.class);
  }
  return names;
}
