/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_tracking_free: (a: number, b: number) => void;
export const partition_starts: (a: number, b: number) => [number, number, number, number];
export const track: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const tracking_bin_starts: (a: number) => [number, number];
export const tracking_comparator: (a: number) => [number, number];
export const tracking_flh: (a: number) => [number, number];
export const tracking_offline: (a: number) => [number, number];
export const tracking_ogd: (a: number) => [number, number];
export const tracking_regret_flh: (a: number) => [number, number];
export const tracking_regret_ogd: (a: number) => [number, number];
export const tracking_targets: (a: number) => [number, number];
export const trend_filter: (a: number, b: number, c: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
