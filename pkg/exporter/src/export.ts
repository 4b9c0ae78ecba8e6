/** Manifest-driven export to a STARFT01 feature file. */

import { readFileSync, writeFileSync } from "node:fs";

import { generateDescriptors, type DescriptorOptions } from "./descriptors.js";
import { makeEncoder, type Encoder } from "./encoder.js";
import { writeFeatureFile, type ClassRecord, type VideoRecord } from "./format.js";
import { classNames, loadManifest, type Manifest, type ManifestVideo } from "./manifest.js";
import { uniformFrameIndices } from "./sampling.js";

export interface ExportJob {
  manifestPath: string;
  outPath: string;
  framesPerVideo?: number;
  descriptors?: DescriptorOptions;
  warn?: (message: string) => void;
}

function inferDim(manifest: Manifest): number {
  if (manifest.dim !== undefined) return manifest.dim;
  for (const video of manifest.videos) {
    if (video.features) return video.features[0].length;
  }
  throw new Error("manifest needs 'dim' when no video carries inline features");
}

function loadFrames(video: ManifestVideo): number[][] {
  if (video.features) return video.features;
  const rows = JSON.parse(readFileSync(video.path!, "utf-8"));
  if (!Array.isArray(rows) || rows.length === 0 || !Array.isArray(rows[0])) {
    throw new Error("expected a non-empty array of frame rows");
  }
  return rows as number[][];
}

function sampleVideo(
  video: ManifestVideo,
  encoder: Encoder,
  framesPerVideo: number,
): Float32Array {
  const rows = loadFrames(video);
  const flat = new Float32Array(framesPerVideo * encoder.dim);
  uniformFrameIndices(rows.length, framesPerVideo).forEach((src, i) => {
    flat.set(encoder.encodeFrame(rows[src]), i * encoder.dim);
  });
  return flat;
}

export async function exportFeatures(job: ExportJob): Promise<Uint8Array> {
  const warn = job.warn ?? ((m) => console.warn(m));
  const framesPerVideo = job.framesPerVideo ?? 8;
  const manifest = loadManifest(job.manifestPath);
  const dim = inferDim(manifest);
  const encoder = makeEncoder(manifest.encoder, dim);

  const names = classNames(manifest);
  const descriptors = await generateDescriptors(names, {
    warn,
    ...job.descriptors,
  });
  const classes: ClassRecord[] = names.map((name, i) => ({
    classId: i,
    name,
    descriptor: descriptors[i],
    embedding: encoder.encodeText(descriptors[i]),
  }));
  const classIdByName = new Map(names.map((name, i) => [name, i]));

  const videos: VideoRecord[] = [];
  for (const video of manifest.videos) {
    try {
      videos.push({
        videoId: videos.length,
        classId: classIdByName.get(video.class)!,
        frames: sampleVideo(video, encoder, framesPerVideo),
      });
    } catch (err) {
      if (video.path) {
        warn(`skipping unreadable video ${video.path}: ${err}`);
        continue;
      }
      throw err;
    }
  }
  const covered = new Set(videos.map((v) => v.classId));
  for (const c of classes) {
    if (!covered.has(c.classId)) {
      throw new Error(`class ${JSON.stringify(c.name)} has no readable videos`);
    }
  }

  const bytes = writeFeatureFile(videos, classes, framesPerVideo, dim);
  writeFileSync(job.outPath, bytes);
  return bytes;
}
