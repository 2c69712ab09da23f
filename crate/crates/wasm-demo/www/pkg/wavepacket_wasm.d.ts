/* tslint:disable */
/* eslint-disable */

/**
 * Critical radius and cube partition of `V = scale |x|^exponent` on a line.
 */
export class CriticalMap {
    free(): void;
    [Symbol.dispose](): void;
    constructor(scale: number, exponent: number, n: number, half_extent: number);
    readonly cubeLeft: Float64Array;
    readonly cubeRight: Float64Array;
    readonly overlap: number;
    readonly rSup: number;
    readonly rho: Float64Array;
    readonly xs: Float64Array;
}

/**
 * Rows `K(x0, .)` of `psi(sigma^2 (-Delta + V))` for a constant `V` and
 * the finite-speed window, whose kernel vanishes beyond `b sigma`.
 */
export class KernelExplorer {
    free(): void;
    [Symbol.dispose](): void;
    constructor(n: number, half_extent: number, potential: number, b: number);
    /**
     * Finite-speed radius `b sigma`.
     */
    radius(sigma: number): number;
    row(sigma: number, center: number): Float64Array;
    readonly xs: Float64Array;
}

/**
 * `|psi(sigma^2 |xi|^2) f|` over `(sigma, x)` for a test signal on a line.
 */
export class Scalogram {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `kind` is `chirp`, `packets` or `step`.
     */
    constructor(kind: string, n: number, half_extent: number, points_per_decade: number);
    /**
     * Row-major, one row of `xs.length` values per sigma.
     */
    readonly magnitudes: Float64Array;
    readonly reconstructionError: number;
    readonly sigmas: Float64Array;
    readonly signal: Float64Array;
    readonly xs: Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_criticalmap_free: (a: number, b: number) => void;
    readonly __wbg_kernelexplorer_free: (a: number, b: number) => void;
    readonly __wbg_scalogram_free: (a: number, b: number) => void;
    readonly criticalmap_cubeLeft: (a: number) => [number, number];
    readonly criticalmap_cubeRight: (a: number) => [number, number];
    readonly criticalmap_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly criticalmap_overlap: (a: number) => number;
    readonly criticalmap_rSup: (a: number) => number;
    readonly criticalmap_rho: (a: number) => [number, number];
    readonly criticalmap_xs: (a: number) => [number, number];
    readonly kernelexplorer_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly kernelexplorer_radius: (a: number, b: number) => number;
    readonly kernelexplorer_row: (a: number, b: number, c: number) => [number, number, number, number];
    readonly kernelexplorer_xs: (a: number) => [number, number];
    readonly scalogram_magnitudes: (a: number) => [number, number];
    readonly scalogram_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly scalogram_reconstructionError: (a: number) => number;
    readonly scalogram_sigmas: (a: number) => [number, number];
    readonly scalogram_signal: (a: number) => [number, number];
    readonly scalogram_xs: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
