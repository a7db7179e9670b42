/** The portable weights document and its forward pass.
 *
 * The serving side reads exactly this JSON shape, so the field names and the
 * layer semantics here are a contract: row-major (rows x cols) matrices,
 * y = W x + b per layer, then relu / softmax / identity. Numbers survive the
 * JSON round trip bit-for-bit because serialization uses the shortest decimal
 * form that parses back to the same double.
 */

export const WEIGHTS_FORMAT_VERSION = 1;

export const ACTIVATIONS = ["relu", "identity", "softmax"] as const;
export type Activation = (typeof ACTIVATIONS)[number];

export interface Layer {
  rows: number;
  cols: number;
  weights: number[]; // row-major
  bias: number[];
  activation: Activation;
}

export interface WeightsFile {
  format_version: number;
  input_dim: number;
  layers: Layer[];
}

export function validateWeights(doc: WeightsFile): void {
  if (doc.format_version !== WEIGHTS_FORMAT_VERSION) {
    throw new Error(`unsupported format_version ${doc.format_version}`);
  }
  if (!Number.isInteger(doc.input_dim) || doc.input_dim < 1 || doc.layers.length === 0) {
    throw new Error("need a positive input_dim and at least one layer");
  }
  let expected = doc.input_dim;
  doc.layers.forEach((layer, idx) => {
    if (!ACTIVATIONS.includes(layer.activation)) {
      throw new Error(`layer ${idx}: unknown activation ${JSON.stringify(layer.activation)}`);
    }
    if (layer.cols !== expected) {
      throw new Error(`layer ${idx}: expects ${layer.cols} inputs but receives ${expected}`);
    }
    if (layer.weights.length !== layer.rows * layer.cols) {
      throw new Error(
        `layer ${idx}: ${layer.weights.length} weights for a ${layer.rows}x${layer.cols} matrix`
      );
    }
    if (layer.bias.length !== layer.rows) {
      throw new Error(`layer ${idx}: bias length != rows`);
    }
    for (const v of [...layer.weights, ...layer.bias]) {
      if (!Number.isFinite(v)) throw new Error(`layer ${idx}: non-finite entries`);
    }
    expected = layer.rows;
  });
}

export function numClasses(doc: WeightsFile): number {
  return doc.layers[doc.layers.length - 1].rows;
}

/** Forward pass for one query; the reference implementation for fixtures. */
export function forward(doc: WeightsFile, query: readonly number[]): number[] {
  if (query.length !== doc.input_dim) {
    throw new Error(`query has dimension ${query.length}, model expects ${doc.input_dim}`);
  }
  let h = Array.from(query);
  for (const layer of doc.layers) {
    const out = new Array<number>(layer.rows);
    for (let r = 0; r < layer.rows; r++) {
      let acc = layer.bias[r];
      const base = r * layer.cols;
      for (let c = 0; c < layer.cols; c++) acc += layer.weights[base + c] * h[c];
      out[r] = acc;
    }
    if (layer.activation === "relu") {
      for (let r = 0; r < out.length; r++) out[r] = Math.max(out[r], 0);
    } else if (layer.activation === "softmax") {
      const top = Math.max(...out);
      let sum = 0;
      for (let r = 0; r < out.length; r++) {
        out[r] = Math.exp(out[r] - top);
        sum += out[r];
      }
      for (let r = 0; r < out.length; r++) out[r] /= sum;
    }
    h = out;
  }
  return h;
}

/** Canonical serialized form: sorted keys, two-space indent, trailing newline. */
export function dumpsWeights(doc: WeightsFile): string {
  validateWeights(doc);
  return canonicalJson(doc);
}

export function parseWeights(text: string): WeightsFile {
  const doc = JSON.parse(text) as WeightsFile;
  validateWeights(doc);
  return doc;
}

export function canonicalJson(value: unknown): string {
  return `${render(value, "")}\n`;
}

function render(value: unknown, indent: string): string {
  if (value === null || typeof value === "boolean") return JSON.stringify(value);
  if (typeof value === "number") {
    if (!Number.isFinite(value)) throw new Error("cannot serialize non-finite number");
    return Number.isInteger(value) && Math.abs(value) < 1e16 ? String(value) : shortest(value);
  }
  if (typeof value === "string") return JSON.stringify(value);
  const inner = `${indent}  `;
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((v) => `${inner}${render(v, inner)}`);
    return `[\n${items.join(",\n")}\n${indent}]`;
  }
  if (typeof value === "object") {
    const keys = Object.keys(value as object).sort();
    if (keys.length === 0) return "{}";
    const items = keys.map(
      (k) => `${inner}${JSON.stringify(k)}: ${render((value as Record<string, unknown>)[k], inner)}`
    );
    return `{\n${items.join(",\n")}\n${indent}}`;
  }
  throw new Error(`cannot serialize ${typeof value}`);
}

function shortest(v: number): string {
  // JSON.stringify already emits the shortest round-tripping decimal
  return JSON.stringify(v);
}
