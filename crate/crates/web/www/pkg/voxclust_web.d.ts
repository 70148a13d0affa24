/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Clusters and ranks; returns the number of clusters.
     */
    cluster(eps: number, min_pts: number, threshold_frac: number): number;
    dims(): Uint32Array;
    median(): number;
    constructor(points: number, seed: number);
    noise(): number;
    /**
     * Cluster sizes in rank order.
     */
    sizes(): Float64Array;
    /**
     * RGBA pixels of the slice `index` across `axis`. Rows run along the
     * first remaining axis, columns along the second. With `labels`,
     * clustered voxels are tinted by rank.
     */
    slice(axis: number, index: number, labels: boolean): Uint8Array;
}

/**
 * Number of neighbor offsets within `eps`; 0 outside (0, 32].
 */
export function stencil_size(eps: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_cluster: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_dims: (a: number) => [number, number];
    readonly demo_median: (a: number) => number;
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_noise: (a: number) => number;
    readonly demo_sizes: (a: number) => [number, number];
    readonly demo_slice: (a: number, b: number, c: number, d: number) => [number, number];
    readonly stencil_size: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
