/**
 * Frame and text encoders behind one interface so a real vision-language
 * backend can be dropped in. Two built-ins ship:
 *
 * - "passthrough": frames in the manifest are already feature vectors of
 *   the target dimension (pre-extracted offline).
 * - "bytes-hash": a deterministic development stand-in that expands a
 *   SHA-256 of the raw input into pseudo-features; useful for exercising
 *   the pipeline without a model.
 *
 * Embeddings are written as-is; any normalization happens downstream.
 */

import { createHash } from "node:crypto";

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  /** One sampled frame to a feature vector. */
  encodeFrame(frame: number[] | Uint8Array): Float32Array;
  /** A class descriptor to a text embedding. */
  encodeText(text: string): Float32Array;
}

/** Deterministic values in [-1, 1) fanned out from a seed string. */
export function hashToFloats(seed: string, dim: number): Float32Array {
  const out = new Float32Array(dim);
  let filled = 0;
  for (let block = 0; filled < dim; block++) {
    const digest = createHash("sha256").update(`${seed}#${block}`).digest();
    for (let i = 0; i + 4 <= digest.length && filled < dim; i += 4) {
      out[filled++] = digest.readUInt32LE(i) / 2 ** 31 - 1.0;
    }
  }
  return out;
}

export class PassthroughEncoder implements Encoder {
  readonly id = "passthrough";

  constructor(readonly dim: number) {}

  encodeFrame(frame: number[] | Uint8Array): Float32Array {
    if (frame.length !== this.dim) {
      throw new Error(
        `pre-extracted frame has ${frame.length} values, expected ${this.dim}`,
      );
    }
    return Float32Array.from(frame);
  }

  encodeText(text: string): Float32Array {
    return hashToFloats(`text:${text}`, this.dim);
  }
}

export class BytesHashEncoder implements Encoder {
  readonly id = "bytes-hash";

  constructor(readonly dim: number) {}

  encodeFrame(frame: number[] | Uint8Array): Float32Array {
    const bytes = frame instanceof Uint8Array ? frame : Uint8Array.from(frame);
    const digest = createHash("sha256").update(bytes).digest("hex");
    return hashToFloats(`frame:${digest}`, this.dim);
  }

  encodeText(text: string): Float32Array {
    return hashToFloats(`text:${text}`, this.dim);
  }
}

export function makeEncoder(id: string, dim: number): Encoder {
  switch (id) {
    case "passthrough":
      return new PassthroughEncoder(dim);
    case "bytes-hash":
      return new BytesHashEncoder(dim);
    default:
      throw new Error(`unknown encoder ${JSON.stringify(id)}`);
  }
}
