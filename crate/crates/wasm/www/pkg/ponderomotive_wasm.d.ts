/* tslint:disable */
/* eslint-disable */

export function covariance_ellipse(omega_m_hz: number, gamma_m_hz: number, gamma_tot_hz: number, gamma_meas_hz: number, mode_hz: number): Float64Array;

export function homodyne_spectrum(omega_m_hz: number, gamma_m_hz: number, gamma_tot_hz: number, gamma_meas_hz: number, theta: number, f_lo: number, f_hi: number, points: number): Float64Array;

export function radiation_pattern_polar(kind: string, phi: number, beta_sq: number, a: number, points: number): Float64Array;

export function squeezing_optimum(omega_m_hz: number, gamma_m_hz: number, gamma_tot_hz: number, gamma_meas_hz: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly covariance_ellipse: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly homodyne_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly radiation_pattern_polar: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly squeezing_optimum: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
