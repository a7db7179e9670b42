/** Bundled training datasets.
 *
 * Both sets live in data/ as JSON written by the repository's dataset script;
 * the first `train_count` rows are the training split and the rest are held
 * out (the serving side bundles evaluation rows drawn from the same holdout).
 * Queries are divided by `scale` on load, so digits pixels can ship as 0..16
 * integers while models see [0, 1] features.
 */

import { readFileSync } from "node:fs";
import { resolve, dirname } from "node:path";
import { fileURLToPath } from "node:url";

export interface Dataset {
  name: string;
  inputDim: number;
  numClasses: number;
  trainX: number[][];
  trainY: number[];
  testX: number[][];
  testY: number[];
}

interface RawDataset {
  name: string;
  num_examples: number;
  input_dim: number;
  train_count: number;
  scale: number;
  queries: number[][];
  labels: number[];
}

export const DATASETS = ["blobs", "digits"] as const;
export type DatasetTag = (typeof DATASETS)[number];

// one level up from src/ (or dist/ once compiled)
const DATA_DIR = resolve(dirname(fileURLToPath(import.meta.url)), "..", "data");

export function datasetPath(tag: string, dir: string = DATA_DIR): string {
  return resolve(dir, `${tag}.json`);
}

export function loadDataset(tag: string, dir: string = DATA_DIR): Dataset {
  if (!(DATASETS as readonly string[]).includes(tag)) {
    throw new Error(`unknown dataset ${JSON.stringify(tag)}; choose from ${DATASETS.join(", ")}`);
  }
  const path = datasetPath(tag, dir);
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(`dataset ${tag} unavailable at ${path}: ${(err as Error).message}`);
  }
  const raw = JSON.parse(text) as RawDataset;
  if (
    raw.queries.length !== raw.num_examples ||
    raw.labels.length !== raw.num_examples ||
    raw.train_count < 1 ||
    raw.train_count >= raw.num_examples
  ) {
    throw new Error(`dataset ${tag} is internally inconsistent`);
  }
  const queries = raw.queries.map((row) => row.map((v) => v / raw.scale));
  const labels = raw.labels;
  return {
    name: raw.name,
    inputDim: raw.input_dim,
    numClasses: Math.max(...labels) + 1,
    trainX: queries.slice(0, raw.train_count),
    trainY: labels.slice(0, raw.train_count),
    testX: queries.slice(raw.train_count),
    testY: labels.slice(raw.train_count),
  };
}
