import { ImageDoc } from "./types";

/** Base64 -> bytes, working in both the browser and node test runs. */
export function b64ToBytes(data: string): Uint8Array {
    if (typeof atob === "function") {
        const binary = atob(data);
        const out = new Uint8Array(binary.length);
        for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
        return out;
    }
    return Uint8Array.from(Buffer.from(data, "base64"));
}

/** Expand a grayscale raster into RGBA pixels for putImageData. */
export function grayToRgba(doc: ImageDoc) {
    const gray = b64ToBytes(doc.data);
    const expected = doc.width * doc.height;
    if (gray.length !== expected) {
        throw new Error(`raster size ${gray.length} != ${doc.width}x${doc.height}`);
    }
    const rgba = new Uint8ClampedArray(expected * 4);
    for (let i = 0; i < expected; i++) {
        const v = gray[i];
        rgba[4 * i] = v;
        rgba[4 * i + 1] = v;
        rgba[4 * i + 2] = v;
        rgba[4 * i + 3] = 255;
    }
    return rgba;
}
