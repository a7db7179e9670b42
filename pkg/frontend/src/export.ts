/** Turn a (dataset, architecture, seed) triple into serving-side artifacts.
 *
 * Writes three files per export: the weights document, a set of forward-pass
 * fixtures for cross-language verification, and a metadata sidecar recording
 * what was trained and how well it did. Everything is deterministic given
 * the seed; there are no timestamps, so re-exports are byte-identical.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { loadDataset, type Dataset } from "./data.js";
import { Rng } from "./rng.js";
import {
  LOGREG_OPTIONS,
  MLP_HIDDEN,
  MLP_OPTIONS,
  identityWeights,
  logregWeights,
  mlpWeights,
  trainLogreg,
  trainMlp,
} from "./train.js";
import { canonicalJson, dumpsWeights, forward, parseWeights, type WeightsFile } from "./weights.js";

export const ARCHITECTURES = ["logreg", "mlp", "identity"] as const;
export type ArchTag = (typeof ARCHITECTURES)[number];

export const FIXTURE_COUNT = 24;
export const FIXTURE_TOLERANCE = 1e-6;

export interface FixtureTriple {
  input: number[];
  expected: number[];
  tolerance: number;
}

export interface ExportResult {
  name: string;
  weights: WeightsFile;
  fixtures: FixtureTriple[];
  meta: Record<string, unknown>;
  paths: { weights: string; fixtures: string; meta: string };
}

function accuracy(weights: WeightsFile, X: number[][], y: number[]): number {
  let hits = 0;
  for (let i = 0; i < X.length; i++) {
    const scores = forward(weights, X[i]);
    let arg = 0;
    for (let j = 1; j < scores.length; j++) if (scores[j] > scores[arg]) arg = j;
    if (arg === y[i]) hits++;
  }
  return hits / X.length;
}

function trainArch(arch: ArchTag, data: Dataset, seed: number): { weights: WeightsFile; hyper: Record<string, unknown> } {
  switch (arch) {
    case "logreg": {
      const model = trainLogreg(data.trainX, data.trainY, data.numClasses);
      return { weights: logregWeights(model, data.inputDim, data.numClasses), hyper: { ...LOGREG_OPTIONS } };
    }
    case "mlp": {
      const model = trainMlp(data.trainX, data.trainY, data.numClasses, seed);
      return {
        weights: mlpWeights(model, data.inputDim, data.numClasses),
        hyper: { ...MLP_OPTIONS, hidden: MLP_HIDDEN },
      };
    }
    case "identity":
      return { weights: identityWeights(data.inputDim), hyper: {} };
    default:
      throw new Error(`unknown architecture ${JSON.stringify(arch)}; choose from ${ARCHITECTURES.join(", ")}`);
  }
}

export function exportModel(dataset: string, arch: string, seed: number, outDir: string): ExportResult {
  if (!(ARCHITECTURES as readonly string[]).includes(arch)) {
    throw new Error(`unknown architecture ${JSON.stringify(arch)}; choose from ${ARCHITECTURES.join(", ")}`);
  }
  const data = loadDataset(dataset);
  const { weights, hyper } = trainArch(arch as ArchTag, data, seed);

  // fixtures are computed from the weights as serialized, not the in-memory
  // ones: reparse the exact document a consumer will read
  const serialized = dumpsWeights(weights);
  const reloaded = parseWeights(serialized);
  const rng = new Rng(seed);
  const picks = rng.pick(data.testX.length, Math.min(FIXTURE_COUNT, data.testX.length));
  const fixtures: FixtureTriple[] = picks.map((i) => ({
    input: data.testX[i],
    expected: forward(reloaded, data.testX[i]),
    tolerance: FIXTURE_TOLERANCE,
  }));

  const meta: Record<string, unknown> = {
    format: "weights-export-meta",
    format_version: 1,
    dataset,
    architecture: arch,
    seed,
    hyperparameters: hyper,
    train_examples: data.trainX.length,
    test_examples: data.testX.length,
    test_accuracy: arch === "identity" ? null : accuracy(reloaded, data.testX, data.testY),
    fixture_count: fixtures.length,
    fixture_tolerance: FIXTURE_TOLERANCE,
  };

  const name = `${dataset}_${arch}`;
  mkdirSync(outDir, { recursive: true });
  const paths = {
    weights: join(outDir, `${name}.json`),
    fixtures: join(outDir, `${name}.fixtures.json`),
    meta: join(outDir, `${name}.meta.json`),
  };
  writeFileSync(paths.weights, serialized);
  writeFileSync(paths.fixtures, canonicalJson(fixtures));
  writeFileSync(paths.meta, canonicalJson(meta));
  return { name, weights: reloaded, fixtures, meta, paths };
}
