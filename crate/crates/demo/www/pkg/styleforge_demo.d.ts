/* tslint:disable */
/* eslint-disable */

/**
 * Style transfer from a benign content image towards a malignant style
 * image, advanced on demand.
 */
export class NstSession {
    free(): void;
    [Symbol.dispose](): void;
    content_loss(): number;
    content_rgba(): Uint8Array;
    image_rgba(): Uint8Array;
    iteration(): number;
    /**
     * The feature network is randomly initialised from `seed`; random
     * convolutional features already carry usable texture statistics.
     */
    constructor(content_index: number, style_index: number, seed: number, learning_rate: number);
    /**
     * Runs `n` optimisation steps and returns the total loss measured before
     * the last of them.
     */
    step(n: number): number;
    style_loss(): number;
    style_rgba(): Uint8Array;
    total_loss(): number;
}

/**
 * Scores for a simulated batch of synthetic images and the balancing
 * threshold chosen for them.
 */
export class ThresholdView {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Pseudo-labels that agree with the hidden group.
     */
    agreement(): number;
    /**
     * AUC of the scores against the hidden groups.
     */
    auc(): number;
    /**
     * Pseudo-labels from the balancing threshold.
     */
    labels(): Uint8Array;
    /**
     * `n` scores; the hidden malignant-like fraction is `skew`, and the two
     * groups' means sit `separation` apart around 0.5.
     */
    constructor(n: number, separation: number, skew: number, seed: number);
    /**
     * Fraction labelled malignant when cutting at `cut` instead.
     */
    positive_rate_at(cut: number): number;
    scores(): Float64Array;
    /**
     * NaN when ties forced the rank split.
     */
    threshold(): number;
    /**
     * Hidden group of each score, 1 for malignant-like.
     */
    truth(): Uint8Array;
}

/**
 * One explicit rotation → zoom → shear → optional reflection of a corpus
 * image.
 */
export function augment_rgba(malignant: boolean, index: number, rotation_deg: number, zoom: number, shear: number, reflect: boolean): Uint8Array;

/**
 * RGBA bytes of a corpus image, for a canvas `ImageData`.
 */
export function corpus_rgba(malignant: boolean, index: number): Uint8Array;

export function image_size(): number;

/**
 * A draw from the default training-time augmentation ranges.
 */
export function random_augment_rgba(malignant: boolean, index: number, seed: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_nstsession_free: (a: number, b: number) => void;
    readonly __wbg_thresholdview_free: (a: number, b: number) => void;
    readonly augment_rgba: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly corpus_rgba: (a: number, b: number) => [number, number];
    readonly image_size: () => number;
    readonly nstsession_content_loss: (a: number) => number;
    readonly nstsession_content_rgba: (a: number) => [number, number];
    readonly nstsession_image_rgba: (a: number) => [number, number];
    readonly nstsession_iteration: (a: number) => number;
    readonly nstsession_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly nstsession_step: (a: number, b: number) => [number, number, number];
    readonly nstsession_style_loss: (a: number) => number;
    readonly nstsession_style_rgba: (a: number) => [number, number];
    readonly nstsession_total_loss: (a: number) => number;
    readonly random_augment_rgba: (a: number, b: number, c: number) => [number, number, number, number];
    readonly thresholdview_agreement: (a: number) => number;
    readonly thresholdview_auc: (a: number) => number;
    readonly thresholdview_labels: (a: number) => [number, number];
    readonly thresholdview_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly thresholdview_positive_rate_at: (a: number, b: number) => number;
    readonly thresholdview_scores: (a: number) => [number, number];
    readonly thresholdview_threshold: (a: number) => number;
    readonly thresholdview_truth: (a: number) => [number, number];
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
