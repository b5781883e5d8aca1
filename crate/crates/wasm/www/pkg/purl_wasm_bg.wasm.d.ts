/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_actionGrid: (a: number) => [number, number];
export const demo_baselineAccuracy: (a: number) => number;
export const demo_episodesDone: (a: number) => number;
export const demo_epsilon: (a: number) => number;
export const demo_layerMask: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_layerShape: (a: number, b: number) => [number, number];
export const demo_layerWeights: (a: number, b: number) => [number, number];
export const demo_layers: (a: number) => number;
export const demo_new: (a: number, b: number, c: number) => [number, number, number];
export const demo_prune: (a: number) => [number, number, number, number];
export const demo_sparsityCurve: (a: number, b: number) => [number, number, number, number];
export const demo_train: (a: number, b: number) => [number, number, number, number];
export const rewardSurface: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
