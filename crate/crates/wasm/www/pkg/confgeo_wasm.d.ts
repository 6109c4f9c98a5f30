/* tslint:disable */
/* eslint-disable */

/**
 * Points and summary of one computed picture.
 */
export class Curves {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Number of points in each curve.
     */
    lengths: Uint32Array;
    /**
     * Concatenated `x, y, z` triples of every curve.
     */
    points: Float64Array;
    summary: string;
}

export function conformalImage(b1: number, b2: number, b3: number, t0: number, t1: number, samples: number): Curves;

export function figure1(t1: number, samples: number): Curves;

export function loxodrome(c: number, t0: number, t1: number, samples: number): Curves;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curves_free: (a: number, b: number) => void;
    readonly __wbg_get_curves_lengths: (a: number) => [number, number];
    readonly __wbg_get_curves_points: (a: number) => [number, number];
    readonly __wbg_get_curves_summary: (a: number) => [number, number];
    readonly __wbg_set_curves_lengths: (a: number, b: number, c: number) => void;
    readonly __wbg_set_curves_points: (a: number, b: number, c: number) => void;
    readonly __wbg_set_curves_summary: (a: number, b: number, c: number) => void;
    readonly conformalImage: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly figure1: (a: number, b: number) => [number, number, number];
    readonly loxodrome: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
