/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curves_free: (a: number, b: number) => void;
export const __wbg_get_curves_lengths: (a: number) => [number, number];
export const __wbg_get_curves_points: (a: number) => [number, number];
export const __wbg_get_curves_summary: (a: number) => [number, number];
export const __wbg_set_curves_lengths: (a: number, b: number, c: number) => void;
export const __wbg_set_curves_points: (a: number, b: number, c: number) => void;
export const __wbg_set_curves_summary: (a: number, b: number, c: number) => void;
export const conformalImage: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const figure1: (a: number, b: number) => [number, number, number];
export const loxodrome: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
