export interface ManifestRow {
  id: string
  rawLabel: string
  payload: string
}

const HEADER = ['id', 'raw_label', 'payload']

/**
 * Parse a manifest CSV: header `id,raw_label,payload`, one sample per row.
 * Labels are trimmed and lowercased. Errors carry 1-based line numbers.
 */
export function parseManifest(text: string): ManifestRow[] {
  const lines = text.split(/\r?\n/)
  if (lines.length === 0 || lines[0].trim() === '') {
    throw new Error('manifest is empty; expected header id,raw_label,payload')
  }
  const header = lines[0].split(',').map(h => h.trim())
  if (header.length !== 3 || !HEADER.every((h, i) => header[i] === h)) {
    throw new Error(`line 1: bad header ${JSON.stringify(lines[0])}; expected id,raw_label,payload`)
  }

  const rows: ManifestRow[] = []
  const seen = new Set<string>()
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i]
    if (line.trim() === '') continue
    const cols = line.split(',')
    const lineno = i + 1
    if (cols.length !== 3) {
      throw new Error(`line ${lineno}: expected 3 columns, got ${cols.length}`)
    }
    const id = cols[0].trim()
    const rawLabel = cols[1].trim().toLowerCase()
    const payload = cols[2].trim()
    if (id === '') throw new Error(`line ${lineno}: empty id`)
    if (rawLabel === '') throw new Error(`line ${lineno}: empty raw_label`)
    if (seen.has(id)) throw new Error(`line ${lineno}: duplicate id ${JSON.stringify(id)}`)
    seen.add(id)
    rows.push({ id, rawLabel, payload })
  }
  return rows
}
