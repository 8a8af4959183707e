import * as fs from 'fs'
import * as path from 'path'

import { buildBackbone } from './backbone'
import { decodeImage } from './images'
import { parseManifest } from './manifest'

export interface ExtractConfig {
  imagesDir: string
  manifestPath: string
  backbone: string
  resize: number
  outPath: string
  /** source tag written on every JSONL line, e.g. "synth:extracted" */
  source: string
}

export interface ExtractFailure {
  id: string
  reason: string
}

export interface ExtractSummary {
  written: number
  dim: number
  backbone: string
  failures: ExtractFailure[]
}

/**
 * Convert an image directory plus manifest into embedding JSONL.
 *
 * One line per successfully embedded sample, preceded by the header line.
 * Rows are sorted by id so parallel decode order can never change the
 * output. Unreadable images are reported per sample and skipped; zero
 * successes is a hard error.
 */
export async function extractEmbeddings(config: ExtractConfig): Promise<ExtractSummary> {
  if (config.resize <= 0 || !Number.isInteger(config.resize)) {
    throw new Error(`resize edge must be a positive integer, got ${config.resize}`)
  }
  const manifestText = fs.readFileSync(config.manifestPath, 'utf-8')
  const rows = parseManifest(manifestText).sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0))

  const backbone = await buildBackbone(config.backbone)
  const lines: string[] = []
  const failures: ExtractFailure[] = []
  try {
    lines.push(
      JSON.stringify({ format: 'emb-jsonl', dim: backbone.dim, backbone: backbone.name }),
    )
    for (const row of rows) {
      const imagePath = path.isAbsolute(row.payload)
        ? row.payload
        : path.join(config.imagesDir, row.payload)
      try {
        const image = decodeImage(fs.readFileSync(imagePath))
        const vec = await backbone.embed(image, config.resize)
        if (!vec.every(Number.isFinite)) {
          throw new Error('backbone produced non-finite features')
        }
        lines.push(
          JSON.stringify({ id: row.id, source: config.source, raw_label: row.rawLabel, vec }),
        )
      } catch (err) {
        failures.push({ id: row.id, reason: err instanceof Error ? err.message : String(err) })
      }
    }
  } finally {
    backbone.dispose()
  }

  const written = lines.length - 1
  if (written === 0) {
    throw new Error(
      `no samples could be embedded (${failures.length} failures: ` +
        failures.map(f => f.id).join(', ') +
        ')',
    )
  }
  fs.writeFileSync(config.outPath, lines.join('\n') + '\n', 'utf-8')
  return { written, dim: backbone.dim, backbone: backbone.name, failures }
}
