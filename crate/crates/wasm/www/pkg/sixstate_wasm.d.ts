/* tslint:disable */
/* eslint-disable */

/**
 * `[L, lambda_opt, rate, ...]` for the asymptotic rate optimized over lambda.
 */
export function asymptoticVsDistance(eta_d: number, eta_m: number, l_max: number, points: number): Float64Array;

/**
 * `[N, finite_rate, asymptotic_rate, ...]` on a log grid of N_source.
 */
export function finiteVsPulses(length_km: number, eta_d: number, eta_m: number, log10_n_min: number, log10_n_max: number, points: number): Float64Array;

export function qberThreshold(): number;

/**
 * `[lambda, e_pdc, lambda, e_pdc, ...]` on a log grid of lambda.
 */
export function qberVsLambda(length_km: number, eta_d: number, eta_m: number, lambda_min: number, lambda_max: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly asymptoticVsDistance: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly finiteVsPulses: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly qberThreshold: () => number;
    readonly qberVsLambda: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
