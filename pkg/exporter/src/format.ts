/**
 * STARFT01 feature file writer.
 *
 * Layout (all integers u32 little-endian, all floats f32 little-endian):
 *   magic "STARFT01" (8 bytes)
 *   version, num_videos, F, D, num_classes
 *   per class:  class_id, name_len, name (UTF-8),
 *               desc_len, descriptor (UTF-8), D floats
 *   per video:  video_id, class_id, F*D floats (frame-major)
 */

export const FEATURE_MAGIC = "STARFT01";
export const FORMAT_VERSION = 1;

export interface ClassRecord {
  classId: number;
  name: string;
  descriptor: string;
  embedding: Float32Array;
}

export interface VideoRecord {
  videoId: number;
  classId: number;
  /** F * dim values, frame-major. */
  frames: Float32Array;
}

const encoder = new TextEncoder();

export function writeFeatureFile(
  videos: VideoRecord[],
  classes: ClassRecord[],
  framesPerVideo: number,
  dim: number,
): Uint8Array {
  if (videos.length === 0) {
    throw new Error("cannot write a feature file with no videos");
  }
  for (const c of classes) {
    if (c.embedding.length !== dim) {
      throw new Error(
        `class ${c.classId} embedding has ${c.embedding.length} values, expected ${dim}`,
      );
    }
  }
  for (const v of videos) {
    if (v.frames.length !== framesPerVideo * dim) {
      throw new Error(
        `video ${v.videoId} has ${v.frames.length} values, expected ${framesPerVideo * dim}`,
      );
    }
  }

  const names = classes.map((c) => encoder.encode(c.name));
  const descs = classes.map((c) => encoder.encode(c.descriptor));
  let size = 8 + 5 * 4;
  for (let i = 0; i < classes.length; i++) {
    size += 4 + 4 + names[i].length + 4 + descs[i].length + 4 * dim;
  }
  size += videos.length * (4 + 4 + 4 * framesPerVideo * dim);

  const buf = new Uint8Array(size);
  const view = new DataView(buf.buffer);
  let pos = 0;

  const u32 = (x: number) => {
    view.setUint32(pos, x >>> 0, true);
    pos += 4;
  };
  const bytes = (b: Uint8Array) => {
    buf.set(b, pos);
    pos += b.length;
  };
  const floats = (f: Float32Array) => {
    for (let i = 0; i < f.length; i++) {
      view.setFloat32(pos, f[i], true);
      pos += 4;
    }
  };

  bytes(encoder.encode(FEATURE_MAGIC));
  u32(FORMAT_VERSION);
  u32(videos.length);
  u32(framesPerVideo);
  u32(dim);
  u32(classes.length);
  for (let i = 0; i < classes.length; i++) {
    u32(classes[i].classId);
    u32(names[i].length);
    bytes(names[i]);
    u32(descs[i].length);
    bytes(descs[i]);
    floats(classes[i].embedding);
  }
  for (const v of videos) {
    u32(v.videoId);
    u32(v.classId);
    floats(v.frames);
  }
  if (pos !== size) {
    throw new Error(`internal size mismatch: wrote ${pos}, allocated ${size}`);
  }
  return buf;
}
