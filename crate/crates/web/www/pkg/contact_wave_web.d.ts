/* tslint:disable */
/* eslint-disable */

/**
 * Temperature profile evolved from `Θ₀`.
 */
export class ProfileDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Steps until `target`, landing on it exactly.
     */
    advance_to(target: number): void;
    /**
     * Linear heat-kernel approximation at the current time.
     */
    linear(): Float64Array;
    /**
     * Squared `L²` norms of the first three derivatives of `ln Θ`.
     */
    log_norms(): Float64Array;
    constructor(theta_minus: number, delta0_reciprocal: number, half_width: number, n: number);
    t(): number;
    theta(): Float64Array;
}

/**
 * Perturbed flow around the evolving profile.
 */
export class WaveDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances to `target`; returns the L-infinity size of the perturbation.
     */
    advance_to(target: number): number;
    /**
     * Interleaved `(t, ‖·‖_∞)` pairs recorded so far.
     */
    history(): Float64Array;
    /**
     * Gaussian bump of the given amplitude in all three components.
     */
    constructor(theta_minus: number, amplitude: number, width: number, half_width: number, n: number);
    /**
     * `(φ, ψ, ζ)` concatenated.
     */
    perturbation_fields(): Float64Array;
    t(): number;
}

/**
 * Node positions of the mesh `[-L, L]` with `n` nodes.
 */
export function nodes(half_width: number, n: number): Float64Array;

/**
 * Initial temperature `Θ₀` sampled on the mesh.
 */
export function theta0_curve(theta_minus: number, delta0_reciprocal: number, half_width: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_profiledemo_free: (a: number, b: number) => void;
    readonly __wbg_wavedemo_free: (a: number, b: number) => void;
    readonly nodes: (a: number, b: number) => [number, number, number, number];
    readonly profiledemo_advance_to: (a: number, b: number) => [number, number];
    readonly profiledemo_linear: (a: number) => [number, number];
    readonly profiledemo_log_norms: (a: number) => [number, number];
    readonly profiledemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly profiledemo_t: (a: number) => number;
    readonly profiledemo_theta: (a: number) => [number, number];
    readonly theta0_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly wavedemo_advance_to: (a: number, b: number) => [number, number, number];
    readonly wavedemo_history: (a: number) => [number, number];
    readonly wavedemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly wavedemo_perturbation_fields: (a: number) => [number, number, number, number];
    readonly wavedemo_t: (a: number) => number;
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
