import * as tf from '@tensorflow/tfjs'

import { DecodedImage } from './images'

export interface Backbone {
  name: string
  dim: number
  /** pooled penultimate-layer features for one image */
  embed(image: DecodedImage, resize: number): Promise<number[]>
  dispose(): void
}

/**
 * Fixed convolutional backbone with seeded weights.
 *
 * Pretrained weights are not fetchable in every environment, so the default
 * backbone is a small convnet whose weights are generated from fixed seeds:
 * the same backbone name always means the same weights, which keeps
 * extraction deterministic. Features are the global-average-pooled
 * activations of the last convolutional block (the network minus its
 * classification head).
 */
function buildSeededCnn(name: string, widths: number[], dim: number): Backbone {
  const model = tf.sequential()
  widths.forEach((filters, i) => {
    model.add(
      tf.layers.conv2d({
        inputShape: i === 0 ? [null as unknown as number, null as unknown as number, 3] : undefined,
        filters,
        kernelSize: 3,
        strides: 2,
        padding: 'same',
        activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed: 1101 + i }),
        biasInitializer: 'zeros',
      }),
    )
  })
  model.add(
    tf.layers.conv2d({
      filters: dim,
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: 1100 + widths.length + 1 }),
      biasInitializer: 'zeros',
    }),
  )
  model.add(tf.layers.globalAveragePooling2d({}))

  return {
    name,
    dim,
    async embed(image: DecodedImage, resize: number): Promise<number[]> {
      const features = tf.tidy(() => {
        const pixels = tf
          .tensor3d(image.rgb, [image.height, image.width, 3])
          .resizeBilinear([resize, resize])
        // normalize [0,1] -> [-1,1], the usual CNN input range
        const input = pixels.mul(2).sub(1).expandDims(0)
        return model.predict(input) as tf.Tensor
      })
      const data = await features.data()
      features.dispose()
      return Array.from(data)
    },
    dispose() {
      model.dispose()
    },
  }
}

const REGISTRY: Record<string, () => Backbone> = {
  'seeded-cnn-v1': () => buildSeededCnn('seeded-cnn-v1', [16, 32], 64),
  'seeded-cnn-wide-v1': () => buildSeededCnn('seeded-cnn-wide-v1', [24, 48], 128),
}

export const DEFAULT_BACKBONE = 'seeded-cnn-v1'

export async function buildBackbone(name: string): Promise<Backbone> {
  const factory = REGISTRY[name]
  if (!factory) {
    const known = Object.keys(REGISTRY).join(', ')
    throw new Error(`unknown backbone ${JSON.stringify(name)}; available: ${known}`)
  }
  await tf.setBackend('cpu')
  await tf.ready()
  return factory()
}
