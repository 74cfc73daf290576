/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const crf_explore: (a: number, b: number) => [number, number];
export const tag_text: (a: number, b: number) => [number, number];
export const train_toy: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
