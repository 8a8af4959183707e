import * as jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export interface DecodedImage {
  width: number
  height: number
  /** row-major RGB, values in [0, 1] */
  rgb: Float32Array
}

function rgbaToRgb(data: Uint8Array, width: number, height: number): Float32Array {
  const rgb = new Float32Array(width * height * 3)
  for (let p = 0; p < width * height; p++) {
    rgb[p * 3] = data[p * 4] / 255
    rgb[p * 3 + 1] = data[p * 4 + 1] / 255
    rgb[p * 3 + 2] = data[p * 4 + 2] / 255
  }
  return rgb
}

/** Decode a PNG or JPEG buffer; anything else is rejected. */
export function decodeImage(buf: Buffer): DecodedImage {
  if (buf.length >= 8 && buf[0] === 0x89 && buf[1] === 0x50 && buf[2] === 0x4e && buf[3] === 0x47) {
    const png = PNG.sync.read(buf)
    return { width: png.width, height: png.height, rgb: rgbaToRgb(png.data, png.width, png.height) }
  }
  if (buf.length >= 2 && buf[0] === 0xff && buf[1] === 0xd8) {
    const img = jpeg.decode(buf, { useTArray: true })
    return { width: img.width, height: img.height, rgb: rgbaToRgb(img.data, img.width, img.height) }
  }
  throw new Error('not a PNG or JPEG file')
}
