/** Uniform frame sampling: index i of count maps to floor(i * total / count). */
export function uniformFrameIndices(total: number, count = 8): number[] {
  if (!Number.isInteger(total) || total < 1) {
    throw new Error(`video has ${total} frames, need at least 1`);
  }
  if (!Number.isInteger(count) || count < 1) {
    throw new Error(`frame count must be a positive integer, got ${count}`);
  }
  const indices: number[] = [];
  for (let i = 0; i < count; i++) {
    indices.push(Math.floor((i * total) / count));
  }
  return indices;
}
