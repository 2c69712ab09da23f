/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_criticalmap_free: (a: number, b: number) => void;
export const __wbg_kernelexplorer_free: (a: number, b: number) => void;
export const __wbg_scalogram_free: (a: number, b: number) => void;
export const criticalmap_cubeLeft: (a: number) => [number, number];
export const criticalmap_cubeRight: (a: number) => [number, number];
export const criticalmap_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const criticalmap_overlap: (a: number) => number;
export const criticalmap_rSup: (a: number) => number;
export const criticalmap_rho: (a: number) => [number, number];
export const criticalmap_xs: (a: number) => [number, number];
export const kernelexplorer_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const kernelexplorer_radius: (a: number, b: number) => number;
export const kernelexplorer_row: (a: number, b: number, c: number) => [number, number, number, number];
export const kernelexplorer_xs: (a: number) => [number, number];
export const scalogram_magnitudes: (a: number) => [number, number];
export const scalogram_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const scalogram_reconstructionError: (a: number) => number;
export const scalogram_sigmas: (a: number) => [number, number];
export const scalogram_signal: (a: number) => [number, number];
export const scalogram_xs: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
