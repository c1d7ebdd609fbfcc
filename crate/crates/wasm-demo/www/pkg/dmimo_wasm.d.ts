/* tslint:disable */
/* eslint-disable */

/**
 * `[azimuth_deg, |a(steer)^H a(az)|]` over `points` azimuths in
 * `[-90°, 90°]` for an `n`-element half-wavelength ULA.
 */
export function beam_pattern(n: number, steer_deg: number, points: number): Float64Array;

/**
 * `[d, g_m, g_m_integer]` triples for a fully connected link with `l_s`
 * paths, sampled every `step` and at every breakpoint.
 */
export function dmt_curve(l_s: number, step: number): Float64Array;

/**
 * `[snr_db, rate_n_s, distributed_all_paths, colocated]` rows for
 * `K_t = K_r = k` subarrays and `l` paths per subchannel.
 */
export function rate_curves(k: number, l: number, n_s: number, snr_min_db: number, snr_max_db: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly beam_pattern: (a: number, b: number, c: number) => [number, number, number, number];
    readonly dmt_curve: (a: number, b: number) => [number, number, number, number];
    readonly rate_curves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
