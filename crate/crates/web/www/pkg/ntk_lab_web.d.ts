/* tslint:disable */
/* eslint-disable */

/**
 * Kernel entries, probe labels and the four metrics after `epochs` epochs.
 */
export function kernel_view(arch: string, seed: number, epochs: number, mode: string): string;

/**
 * Per-epoch metrics, kernel drift and test accuracy.
 */
export function metric_curves(arch: string, seed: number, epochs: number, mode: string): string;

/**
 * A uniformly drawn cell for a space with `nodes` nodes and `ops` operations.
 */
export function random_arch(seed: number, nodes: number, ops: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly kernel_view: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly metric_curves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly random_arch: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
