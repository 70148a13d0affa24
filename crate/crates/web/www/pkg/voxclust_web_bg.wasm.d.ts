/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_cluster: (a: number, b: number, c: number, d: number) => [number, number, number];
export const demo_dims: (a: number) => [number, number];
export const demo_median: (a: number) => number;
export const demo_new: (a: number, b: number) => [number, number, number];
export const demo_noise: (a: number) => number;
export const demo_sizes: (a: number) => [number, number];
export const demo_slice: (a: number, b: number, c: number, d: number) => [number, number];
export const stencil_size: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
