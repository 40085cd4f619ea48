/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_profiledemo_free: (a: number, b: number) => void;
export const __wbg_wavedemo_free: (a: number, b: number) => void;
export const nodes: (a: number, b: number) => [number, number, number, number];
export const profiledemo_advance_to: (a: number, b: number) => [number, number];
export const profiledemo_linear: (a: number) => [number, number];
export const profiledemo_log_norms: (a: number) => [number, number];
export const profiledemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const profiledemo_t: (a: number) => number;
export const profiledemo_theta: (a: number) => [number, number];
export const theta0_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const wavedemo_advance_to: (a: number, b: number) => [number, number, number];
export const wavedemo_history: (a: number) => [number, number];
export const wavedemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const wavedemo_perturbation_fields: (a: number) => [number, number, number, number];
export const wavedemo_t: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
