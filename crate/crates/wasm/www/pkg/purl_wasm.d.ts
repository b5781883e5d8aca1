/* tslint:disable */
/* eslint-disable */

/**
 * One pre-trained model, its pruning environment and a DQN agent.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    actionGrid(): Float64Array;
    baselineAccuracy(): number;
    episodesDone(): number;
    epsilon(): number;
    /**
     * Keep-mask (1 kept, 0 pruned) of the unpruned layer after the std rule at `alpha`.
     */
    layerMask(layer: number, alpha: number): Uint8Array;
    /**
     * `[rows, cols]` of a layer's weight matrix.
     */
    layerShape(layer: number): Uint32Array;
    layerWeights(layer: number): Float64Array;
    layers(): number;
    /**
     * `reward_mode` is `"dense"` or `"sparse"`.
     */
    constructor(seed: number, reward_mode: string);
    /**
     * Stage 2 and fine-tuning, plus a uniform baseline at the same sparsity, as JSON.
     */
    prune(): string;
    /**
     * Layer sparsity for every alpha of the action grid.
     */
    sparsityCurve(layer: number): Float64Array;
    /**
     * Runs `count` more training episodes; returns their summaries as JSON.
     */
    train(count: number): string;
}

/**
 * Reward over an `n x n` grid of accuracy (rows, 0 to 1) and sparsity
 * (columns, 0 to 1), row-major.
 */
export function rewardSurface(variant_name: string, as_printed: boolean, target_accuracy: number, target_sparsity: number, beta: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_actionGrid: (a: number) => [number, number];
    readonly demo_baselineAccuracy: (a: number) => number;
    readonly demo_episodesDone: (a: number) => number;
    readonly demo_epsilon: (a: number) => number;
    readonly demo_layerMask: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_layerShape: (a: number, b: number) => [number, number];
    readonly demo_layerWeights: (a: number, b: number) => [number, number];
    readonly demo_layers: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_prune: (a: number) => [number, number, number, number];
    readonly demo_sparsityCurve: (a: number, b: number) => [number, number, number, number];
    readonly demo_train: (a: number, b: number) => [number, number, number, number];
    readonly rewardSurface: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
