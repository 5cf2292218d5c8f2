/* tslint:disable */
/* eslint-disable */

/**
 * One seed of both channels on a 64×64 camera.
 */
export class Comparison {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Gate delay (ns), reference SNR, fast SNR.
     */
    readonly curves: Curves;
    readonly t_fast: number;
    /**
     * ns, NaN when never detected.
     */
    readonly t_reference: number;
}

/**
 * Shared x axis with up to three y series. Missing values are NaN.
 */
export class Curves {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly a: Float64Array;
    readonly b: Float64Array;
    readonly c: Float64Array;
    readonly x: Float64Array;
}

/**
 * Detected mean, Fano factor and SNR relative to the unamplified case,
 * for power gains 1..`max_gain`.
 */
export function amplifier_noise(mean_in: number, max_gain: number, efficiency: number): Curves;

export function compare_run(efficiency: number, advancement_ns: number, dark_mean: number, seed: bigint): Comparison;

/**
 * Input and advanced output intensity (photons/ns) and the power gain
 * `G(t)` between them, on a 0..1600 ns axis.
 */
export function reshape_pulse(fwhm_ns: number, advancement_ns: number, compression: number): Curves;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_comparison_free: (a: number, b: number) => void;
    readonly __wbg_curves_free: (a: number, b: number) => void;
    readonly amplifier_noise: (a: number, b: number, c: number) => number;
    readonly compare_run: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly comparison_curves: (a: number) => number;
    readonly comparison_t_fast: (a: number) => number;
    readonly comparison_t_reference: (a: number) => number;
    readonly curves_a: (a: number) => [number, number];
    readonly curves_b: (a: number) => [number, number];
    readonly curves_c: (a: number) => [number, number];
    readonly curves_x: (a: number) => [number, number];
    readonly reshape_pulse: (a: number, b: number, c: number) => [number, number, number];
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
