/**
 * Class descriptor generation with a disk cache.
 *
 * When an LLM endpoint is configured, each class name is rendered into the
 * prompt template and sent off; responses are cached so re-exports never
 * repeat a call. Without an endpoint (or when a call fails) the descriptor
 * falls back to the static template "a photo of <class>".
 */

import { createHash } from "node:crypto";
import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

export const CLASS_SLOT = "[CLS]";
export const STATIC_TEMPLATE = `a photo of ${CLASS_SLOT}`;

export interface DescriptorOptions {
  /** Prompt template; must contain the class-name slot. */
  template?: string;
  /** LLM endpoint URL; omitted means static-template fallback. */
  endpoint?: string;
  /** Model identifier, part of the cache key. */
  modelId?: string;
  /** JSON cache file path; omitted disables persistence. */
  cachePath?: string;
  /** Injection point for tests; defaults to global fetch. */
  fetchImpl?: typeof fetch;
  warn?: (message: string) => void;
}

export function renderTemplate(template: string, className: string): string {
  if (!template.includes(CLASS_SLOT)) {
    throw new Error(
      `prompt template has no ${CLASS_SLOT} slot: ${JSON.stringify(template)}`,
    );
  }
  return template.replaceAll(CLASS_SLOT, className);
}

export class DescriptorCache {
  private entries: Record<string, string> = {};

  constructor(private readonly path?: string) {
    if (path && existsSync(path)) {
      this.entries = JSON.parse(readFileSync(path, "utf-8"));
    }
  }

  static key(modelId: string, template: string, className: string): string {
    const templateHash = createHash("sha256").update(template).digest("hex");
    return `${modelId}:${templateHash}:${className}`;
  }

  get(key: string): string | undefined {
    return this.entries[key];
  }

  set(key: string, value: string): void {
    this.entries[key] = value;
    if (this.path) {
      mkdirSync(dirname(this.path), { recursive: true });
      writeFileSync(this.path, JSON.stringify(this.entries, null, 2));
    }
  }
}

async function callEndpoint(
  endpoint: string,
  modelId: string,
  prompt: string,
  fetchImpl: typeof fetch,
): Promise<string> {
  const res = await fetchImpl(endpoint, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ model: modelId, prompt }),
  });
  if (!res.ok) {
    throw new Error(`descriptor endpoint returned ${res.status}`);
  }
  const body = (await res.json()) as { text?: unknown };
  if (typeof body.text !== "string" || body.text.length === 0) {
    throw new Error("descriptor endpoint returned no text");
  }
  return body.text;
}

/** One descriptor per class name, in input order. */
export async function generateDescriptors(
  classNames: string[],
  options: DescriptorOptions = {},
): Promise<string[]> {
  const template = options.template ?? STATIC_TEMPLATE;
  if (!template.includes(CLASS_SLOT)) {
    throw new Error(
      `prompt template has no ${CLASS_SLOT} slot: ${JSON.stringify(template)}`,
    );
  }
  const modelId = options.modelId ?? "static";
  const warn = options.warn ?? ((m) => console.warn(m));
  const fetchImpl = options.fetchImpl ?? fetch;
  const cache = new DescriptorCache(options.cachePath);

  const out: string[] = [];
  for (const name of classNames) {
    const fallback = renderTemplate(STATIC_TEMPLATE, name);
    if (!options.endpoint) {
      out.push(fallback);
      continue;
    }
    const prompt = renderTemplate(template, name);
    const key = DescriptorCache.key(modelId, template, name);
    const cached = cache.get(key);
    if (cached !== undefined) {
      out.push(cached);
      continue;
    }
    try {
      const text = await callEndpoint(
        options.endpoint,
        modelId,
        prompt,
        fetchImpl,
      );
      cache.set(key, text);
      out.push(text);
    } catch (err) {
      warn(`descriptor generation failed for "${name}": ${err}; using fallback`);
      out.push(fallback);
    }
  }
  return out;
}
