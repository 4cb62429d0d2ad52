#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { AlignmentError, CoverageError, InputError } from "./errors.js";
import { exportFeatures, type FeatureMode } from "./features.js";
import { predictToFile, readJson, readPage, writeJson } from "./predict.js";
import { parseGroups } from "./schemas.js";

function run(fn: () => void): void {
  try {
    fn();
  } catch (err) {
    if (
      err instanceof InputError ||
      err instanceof AlignmentError ||
      err instanceof CoverageError
    ) {
      console.error(`${err.name}: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }
}

yargs(hideBin(process.argv))
  .scriptName("refex-adapter")
  .command(
    "export-features",
    "Export per-token (text, bbox) training features for one page",
    (y) =>
      y
        .option("page", { type: "string", demandOption: true, describe: "OCR page JSON" })
        .option("image", { type: "string", demandOption: true, describe: "page image reference" })
        .option("mode", { choices: ["word", "segment"] as const, default: "word" as FeatureMode })
        .option("groups", { type: "string", describe: "groups dump JSON (required for segment mode)" })
        .option("out", { type: "string", demandOption: true }),
    (argv) =>
      run(() => {
        const page = readPage(argv.page);
        const groups = argv.groups ? parseGroups(readJson(argv.groups)) : null;
        const exported = exportFeatures(page, groups, argv.mode, argv.image);
        writeJson(argv.out, exported);
        console.log(`wrote ${exported.features.length} features to ${argv.out}`);
      })
  )
  .command(
    "predict",
    "Write a per-token BIO tag prediction file for one page",
    (y) =>
      y
        .option("model", { type: "string", demandOption: true, describe: '"stub" or "fixture:<path>"' })
        .option("image", { type: "string", demandOption: true, describe: "page image file" })
        .option("page", { type: "string", demandOption: true, describe: "OCR page JSON" })
        .option("out", { type: "string", demandOption: true }),
    (argv) =>
      run(() => {
        const pred = predictToFile(argv.model, argv.image, argv.page, argv.out);
        console.log(`wrote ${pred.tags.length} tags to ${argv.out}`);
      })
  )
  .demandCommand(1)
  .strict()
  .parse();
