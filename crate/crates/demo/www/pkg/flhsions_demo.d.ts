/* tslint:disable */
/* eslint-disable */

/**
 * One synthetic environment with learner tracks.
 */
export class Tracking {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * 0-based first rounds of the greedy bins of the offline optimum.
     */
    readonly bin_starts: Uint32Array;
    readonly comparator: Float64Array;
    readonly flh: Float64Array;
    /**
     * Offline optimum at the generating budget.
     */
    readonly offline: Float64Array;
    readonly ogd: Float64Array;
    /**
     * Cumulative regret against the offline optimum.
     */
    readonly regret_flh: Float64Array;
    readonly regret_ogd: Float64Array;
    readonly targets: Float64Array;
}

/**
 * Greedy bins of an arbitrary sequence, as 0-based start indices.
 */
export function partition_starts(values: Float64Array): Uint32Array;

export function track(n: number, kinks: number, budget: number, noise: number, seed: number): Tracking;

export function trend_filter(values: Float64Array, lambda: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_tracking_free: (a: number, b: number) => void;
    readonly partition_starts: (a: number, b: number) => [number, number, number, number];
    readonly track: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly tracking_bin_starts: (a: number) => [number, number];
    readonly tracking_comparator: (a: number) => [number, number];
    readonly tracking_flh: (a: number) => [number, number];
    readonly tracking_offline: (a: number) => [number, number];
    readonly tracking_ogd: (a: number) => [number, number];
    readonly tracking_regret_flh: (a: number) => [number, number];
    readonly tracking_regret_ogd: (a: number) => [number, number];
    readonly tracking_targets: (a: number) => [number, number];
    readonly trend_filter: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
