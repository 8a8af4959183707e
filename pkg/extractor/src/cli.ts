import { parseArgs } from 'node:util'

import { DEFAULT_BACKBONE } from './backbone'
import { extractEmbeddings } from './extract'

const USAGE = `usage: extract --images <dir> --manifest <csv> [--backbone <name>] [--resize <int>] [--source <tag>] --out <file.jsonl>`

async function main(): Promise<number> {
  const argv = process.argv.slice(2)
  const command = argv[0]
  if (command !== 'extract') {
    console.error(command ? `unknown command ${JSON.stringify(command)}` : USAGE)
    return 2
  }
  let values
  try {
    values = parseArgs({
      args: argv.slice(1),
      options: {
        images: { type: 'string' },
        manifest: { type: 'string' },
        backbone: { type: 'string', default: DEFAULT_BACKBONE },
        resize: { type: 'string', default: '224' },
        source: { type: 'string', default: 'synth:extracted' },
        out: { type: 'string' },
      },
    }).values
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err))
    console.error(USAGE)
    return 2
  }
  if (!values.images || !values.manifest || !values.out) {
    console.error(USAGE)
    return 2
  }
  const resize = Number(values.resize)

  try {
    const summary = await extractEmbeddings({
      imagesDir: values.images,
      manifestPath: values.manifest,
      backbone: values.backbone!,
      resize,
      outPath: values.out,
      source: values.source!,
    })
    console.log(
      `wrote ${summary.written} vectors (dim ${summary.dim}, backbone ${summary.backbone}) -> ${values.out}`,
    )
    if (summary.failures.length > 0) {
      console.error(`failed samples (${summary.failures.length}):`)
      for (const failure of summary.failures) {
        console.error(`  ${failure.id}: ${failure.reason}`)
      }
    }
    return 0
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`)
    return 1
  }
}

main().then(code => {
  process.exitCode = code
})
