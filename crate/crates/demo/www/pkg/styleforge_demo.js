/* @ts-self-types="./styleforge_demo.d.ts" */

/**
 * Style transfer from a benign content image towards a malignant style
 * image, advanced on demand.
 */
export class NstSession {
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        NstSessionFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_nstsession_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    content_loss() {
        const ret = wasm.nstsession_content_loss(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Uint8Array}
     */
    content_rgba() {
        const ret = wasm.nstsession_content_rgba(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {Uint8Array}
     */
    image_rgba() {
        const ret = wasm.nstsession_image_rgba(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    iteration() {
        const ret = wasm.nstsession_iteration(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * The feature network is randomly initialised from `seed`; random
     * convolutional features already carry usable texture statistics.
     * @param {number} content_index
     * @param {number} style_index
     * @param {number} seed
     * @param {number} learning_rate
     */
    constructor(content_index, style_index, seed, learning_rate) {
        const ret = wasm.nstsession_new(content_index, style_index, seed, learning_rate);
        if (ret[2]) {
            throw takeFromExternrefTable0(ret[1]);
        }
        this.__wbg_ptr = ret[0];
        NstSessionFinalization.register(this, this.__wbg_ptr, this);
        return this;
    }
    /**
     * Runs `n` optimisation steps and returns the total loss measured before
     * the last of them.
     * @param {number} n
     * @returns {number}
     */
    step(n) {
        const ret = wasm.nstsession_step(this.__wbg_ptr, n);
        if (ret[2]) {
            throw takeFromExternrefTable0(ret[1]);
        }
        return ret[0];
    }
    /**
     * @returns {number}
     */
    style_loss() {
        const ret = wasm.nstsession_style_loss(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Uint8Array}
     */
    style_rgba() {
        const ret = wasm.nstsession_style_rgba(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    total_loss() {
        const ret = wasm.nstsession_total_loss(this.__wbg_ptr);
        return ret;
    }
}
if (Symbol.dispose) NstSession.prototype[Symbol.dispose] = NstSession.prototype.free;

/**
 * Scores for a simulated batch of synthetic images and the balancing
 * threshold chosen for them.
 */
export class ThresholdView {
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ThresholdViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_thresholdview_free(ptr, 0);
    }
    /**
     * Pseudo-labels that agree with the hidden group.
     * @returns {number}
     */
    agreement() {
        const ret = wasm.thresholdview_agreement(this.__wbg_ptr);
        return ret;
    }
    /**
     * AUC of the scores against the hidden groups.
     * @returns {number}
     */
    auc() {
        const ret = wasm.thresholdview_auc(this.__wbg_ptr);
        return ret;
    }
    /**
     * Pseudo-labels from the balancing threshold.
     * @returns {Uint8Array}
     */
    labels() {
        const ret = wasm.thresholdview_labels(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * `n` scores; the hidden malignant-like fraction is `skew`, and the two
     * groups' means sit `separation` apart around 0.5.
     * @param {number} n
     * @param {number} separation
     * @param {number} skew
     * @param {number} seed
     */
    constructor(n, separation, skew, seed) {
        const ret = wasm.thresholdview_new(n, separation, skew, seed);
        if (ret[2]) {
            throw takeFromExternrefTable0(ret[1]);
        }
        this.__wbg_ptr = ret[0];
        ThresholdViewFinalization.register(this, this.__wbg_ptr, this);
        return this;
    }
    /**
     * Fraction labelled malignant when cutting at `cut` instead.
     * @param {number} cut
     * @returns {number}
     */
    positive_rate_at(cut) {
        const ret = wasm.thresholdview_positive_rate_at(this.__wbg_ptr, cut);
        return ret;
    }
    /**
     * @returns {Float64Array}
     */
    scores() {
        const ret = wasm.thresholdview_scores(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * NaN when ties forced the rank split.
     * @returns {number}
     */
    threshold() {
        const ret = wasm.thresholdview_threshold(this.__wbg_ptr);
        return ret;
    }
    /**
     * Hidden group of each score, 1 for malignant-like.
     * @returns {Uint8Array}
     */
    truth() {
        const ret = wasm.thresholdview_truth(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
}
if (Symbol.dispose) ThresholdView.prototype[Symbol.dispose] = ThresholdView.prototype.free;

/**
 * One explicit rotation → zoom → shear → optional reflection of a corpus
 * image.
 * @param {boolean} malignant
 * @param {number} index
 * @param {number} rotation_deg
 * @param {number} zoom
 * @param {number} shear
 * @param {boolean} reflect
 * @returns {Uint8Array}
 */
export function augment_rgba(malignant, index, rotation_deg, zoom, shear, reflect) {
    const ret = wasm.augment_rgba(malignant, index, rotation_deg, zoom, shear, reflect);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
    return v1;
}

/**
 * RGBA bytes of a corpus image, for a canvas `ImageData`.
 * @param {boolean} malignant
 * @param {number} index
 * @returns {Uint8Array}
 */
export function corpus_rgba(malignant, index) {
    const ret = wasm.corpus_rgba(malignant, index);
    var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
    return v1;
}

/**
 * @returns {number}
 */
export function image_size() {
    const ret = wasm.image_size();
    return ret >>> 0;
}

/**
 * A draw from the default training-time augmentation ranges.
 * @param {boolean} malignant
 * @param {number} index
 * @param {number} seed
 * @returns {Uint8Array}
 */
export function random_augment_rgba(malignant, index, seed) {
    const ret = wasm.random_augment_rgba(malignant, index, seed);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
    return v1;
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_generic_0000000000000001: function(arg0, arg1) {
            // Cast intrinsic for `Ref(String) -> Externref`.
            const ret = getStringFromWasm0(arg0, arg1);
            return ret;
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./styleforge_demo_bg.js": import0,
    };
}

const NstSessionFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_nstsession_free(ptr, 1));
const ThresholdViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_thresholdview_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

function getArrayU8FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint8ArrayMemory0().subarray(ptr / 1, ptr / 1 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('styleforge_demo_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
