/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_comparison_free: (a: number, b: number) => void;
export const __wbg_curves_free: (a: number, b: number) => void;
export const amplifier_noise: (a: number, b: number, c: number) => number;
export const compare_run: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const comparison_curves: (a: number) => number;
export const comparison_t_fast: (a: number) => number;
export const comparison_t_reference: (a: number) => number;
export const curves_a: (a: number) => [number, number];
export const curves_b: (a: number) => [number, number];
export const curves_c: (a: number) => [number, number];
export const curves_x: (a: number) => [number, number];
export const reshape_pulse: (a: number, b: number, c: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
