/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_nstsession_free: (a: number, b: number) => void;
export const __wbg_thresholdview_free: (a: number, b: number) => void;
export const augment_rgba: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const corpus_rgba: (a: number, b: number) => [number, number];
export const image_size: () => number;
export const nstsession_content_loss: (a: number) => number;
export const nstsession_content_rgba: (a: number) => [number, number];
export const nstsession_image_rgba: (a: number) => [number, number];
export const nstsession_iteration: (a: number) => number;
export const nstsession_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const nstsession_step: (a: number, b: number) => [number, number, number];
export const nstsession_style_loss: (a: number) => number;
export const nstsession_style_rgba: (a: number) => [number, number];
export const nstsession_total_loss: (a: number) => number;
export const random_augment_rgba: (a: number, b: number, c: number) => [number, number, number, number];
export const thresholdview_agreement: (a: number) => number;
export const thresholdview_auc: (a: number) => number;
export const thresholdview_labels: (a: number) => [number, number];
export const thresholdview_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const thresholdview_positive_rate_at: (a: number, b: number) => number;
export const thresholdview_scores: (a: number) => [number, number];
export const thresholdview_threshold: (a: number) => number;
export const thresholdview_truth: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
