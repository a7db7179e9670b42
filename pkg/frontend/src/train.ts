/** Reference trainers: multinomial logistic regression and a 2-layer MLP.
 *
 * Both use full-batch gradient descent with Nesterov momentum, so given a
 * seed (and the deterministic dataset files) the produced weights are fully
 * reproducible. Hidden math runs on flat Float64Arrays; the matrices are
 * small enough that plain loops beat any dependency here.
 */

import { Rng } from "./rng.js";
import type { Layer, WeightsFile } from "./weights.js";

export interface TrainOptions {
  learningRate: number;
  iterations: number;
  momentum: number;
  l2: number;
}

// Strong L2 keeps the class scores smooth; the serving side interpolates
// model outputs along a path through input space, and an overconfident head
// turns that path into a step function no interpolant can track.
export const LOGREG_OPTIONS: TrainOptions = {
  learningRate: 1.0,
  iterations: 1000,
  momentum: 0.9,
  l2: 0.0223,
};

export const MLP_OPTIONS: TrainOptions = {
  learningRate: 1.0,
  iterations: 2000,
  momentum: 0.9,
  l2: 1e-4,
};

export const MLP_HIDDEN = 12;

function flatten(rows: number[][]): Float64Array {
  const n = rows.length;
  const d = rows[0].length;
  const out = new Float64Array(n * d);
  for (let i = 0; i < n; i++) for (let j = 0; j < d; j++) out[i * d + j] = rows[i][j];
  return out;
}

/** Row-wise softmax of an n x c matrix, in place. */
function softmaxRows(z: Float64Array, n: number, c: number): void {
  for (let i = 0; i < n; i++) {
    const base = i * c;
    let top = -Infinity;
    for (let j = 0; j < c; j++) top = Math.max(top, z[base + j]);
    let sum = 0;
    for (let j = 0; j < c; j++) {
      z[base + j] = Math.exp(z[base + j] - top);
      sum += z[base + j];
    }
    for (let j = 0; j < c; j++) z[base + j] /= sum;
  }
}

/** P <- softmax(X W^T + b) for row-major X (n x d), W (c x d). */
function forwardLinear(
  X: Float64Array,
  n: number,
  d: number,
  W: Float64Array,
  b: Float64Array,
  c: number,
  out: Float64Array
): void {
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < c; j++) {
      let acc = b[j];
      const xb = i * d;
      const wb = j * d;
      for (let k = 0; k < d; k++) acc += X[xb + k] * W[wb + k];
      out[i * c + j] = acc;
    }
  }
}

interface LinearModel {
  W: Float64Array;
  b: Float64Array;
}

function descend(
  params: Float64Array[],
  grads: (lookahead: Float64Array[]) => Float64Array[],
  opts: TrainOptions
): void {
  const { learningRate: lr, iterations, momentum: mu } = opts;
  const velocity = params.map((p) => new Float64Array(p.length));
  const ahead = params.map((p) => new Float64Array(p.length));
  for (let it = 0; it < iterations; it++) {
    for (let s = 0; s < params.length; s++) {
      for (let i = 0; i < params[s].length; i++) {
        ahead[s][i] = params[s][i] + mu * velocity[s][i];
      }
    }
    const g = grads(ahead);
    for (let s = 0; s < params.length; s++) {
      for (let i = 0; i < params[s].length; i++) {
        velocity[s][i] = mu * velocity[s][i] - lr * g[s][i];
        params[s][i] += velocity[s][i];
      }
    }
  }
}

export function trainLogreg(
  trainX: number[][],
  trainY: number[],
  numClasses: number,
  opts: TrainOptions = LOGREG_OPTIONS
): LinearModel {
  const n = trainX.length;
  const d = trainX[0].length;
  const c = numClasses;
  const X = flatten(trainX);
  const W = new Float64Array(c * d);
  const b = new Float64Array(c);
  const P = new Float64Array(n * c);

  descend(
    [W, b],
    ([Wl, bl]) => {
      forwardLinear(X, n, d, Wl, bl, c, P);
      softmaxRows(P, n, c);
      for (let i = 0; i < n; i++) P[i * c + trainY[i]] -= 1;
      const gW = new Float64Array(c * d);
      const gb = new Float64Array(c);
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < c; j++) {
          const r = P[i * c + j] / n;
          gb[j] += r;
          const wb = j * d;
          const xb = i * d;
          for (let k = 0; k < d; k++) gW[wb + k] += r * X[xb + k];
        }
      }
      for (let i = 0; i < gW.length; i++) gW[i] += opts.l2 * Wl[i]; // bias unpenalized
      return [gW, gb];
    },
    opts
  );
  return { W, b };
}

export interface MlpModel {
  W1: Float64Array;
  b1: Float64Array;
  W2: Float64Array;
  b2: Float64Array;
  hidden: number;
}

export function trainMlp(
  trainX: number[][],
  trainY: number[],
  numClasses: number,
  seed: number,
  hidden: number = MLP_HIDDEN,
  opts: TrainOptions = MLP_OPTIONS
): MlpModel {
  const n = trainX.length;
  const d = trainX[0].length;
  const c = numClasses;
  const X = flatten(trainX);
  const rng = new Rng(seed);

  const glorot = (rows: number, cols: number) => {
    const a = new Float64Array(rows * cols);
    const s = Math.sqrt(2 / (rows + cols));
    for (let i = 0; i < a.length; i++) a[i] = rng.normal() * s;
    return a;
  };
  const W1 = glorot(hidden, d);
  const b1 = new Float64Array(hidden);
  const W2 = glorot(c, hidden);
  const b2 = new Float64Array(c);

  const A = new Float64Array(n * hidden);
  const P = new Float64Array(n * c);

  descend(
    [W1, b1, W2, b2],
    ([lW1, lb1, lW2, lb2]) => {
      forwardLinear(X, n, d, lW1, lb1, hidden, A);
      for (let i = 0; i < A.length; i++) A[i] = Math.max(A[i], 0);
      forwardLinear(A, n, hidden, lW2, lb2, c, P);
      softmaxRows(P, n, c);
      for (let i = 0; i < n; i++) P[i * c + trainY[i]] -= 1;

      const gW2 = new Float64Array(c * hidden);
      const gb2 = new Float64Array(c);
      const G1 = new Float64Array(n * hidden);
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < c; j++) {
          const r = P[i * c + j] / n;
          gb2[j] += r;
          for (let k = 0; k < hidden; k++) {
            gW2[j * hidden + k] += r * A[i * hidden + k];
            G1[i * hidden + k] += (P[i * c + j] * lW2[j * hidden + k]) / n;
          }
        }
      }
      for (let i = 0; i < G1.length; i++) if (A[i] === 0) G1[i] = 0; // relu gate

      const gW1 = new Float64Array(hidden * d);
      const gb1 = new Float64Array(hidden);
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < hidden; j++) {
          const r = G1[i * hidden + j];
          gb1[j] += r;
          for (let k = 0; k < d; k++) gW1[j * d + k] += r * X[i * d + k];
        }
      }
      for (let i = 0; i < gW1.length; i++) gW1[i] += opts.l2 * lW1[i];
      for (let i = 0; i < gW2.length; i++) gW2[i] += opts.l2 * lW2[i];
      return [gW1, gb1, gW2, gb2];
    },
    opts
  );
  return { W1, b1, W2, b2, hidden };
}

function layer(rows: number, cols: number, W: Float64Array, b: Float64Array, activation: Layer["activation"]): Layer {
  return { rows, cols, weights: Array.from(W), bias: Array.from(b), activation };
}

export function logregWeights(model: LinearModel, inputDim: number, numClasses: number): WeightsFile {
  return {
    format_version: 1,
    input_dim: inputDim,
    layers: [layer(numClasses, inputDim, model.W, model.b, "softmax")],
  };
}

export function mlpWeights(model: MlpModel, inputDim: number, numClasses: number): WeightsFile {
  return {
    format_version: 1,
    input_dim: inputDim,
    layers: [
      layer(model.hidden, inputDim, model.W1, model.b1, "relu"),
      layer(numClasses, model.hidden, model.W2, model.b2, "softmax"),
    ],
  };
}

export function identityWeights(inputDim: number): WeightsFile {
  const W = new Float64Array(inputDim * inputDim);
  for (let i = 0; i < inputDim; i++) W[i * inputDim + i] = 1;
  return {
    format_version: 1,
    input_dim: inputDim,
    layers: [layer(inputDim, inputDim, W, new Float64Array(inputDim), "identity")],
  };
}
