import fs from "fs";
import path from "path";
import { loadModel } from "./backends.js";
import { AlignmentError, InputError } from "./errors.js";
import {
  checkTokenCoverage,
  parsePage,
  validatePredictions,
  type Page,
  type PredictionFile,
} from "./schemas.js";
import { subwordize } from "./subwords.js";

export function readJson(filePath: string): unknown {
  if (!fs.existsSync(filePath)) {
    throw new InputError(`file not found: ${filePath}`);
  }
  try {
    return JSON.parse(fs.readFileSync(filePath, "utf-8"));
  } catch (err) {
    throw new InputError(`${filePath} is not valid JSON: ${err}`);
  }
}

export function writeJson(filePath: string, data: unknown): void {
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  fs.writeFileSync(filePath, JSON.stringify(data, null, 2) + "\n");
}

export function readPage(pagePath: string): Page {
  return parsePage(readJson(pagePath));
}

// One BIO tag per OCR token; subword predictions collapse to the first
// subword's tag. Confidences are recorded in the output but nothing
// downstream consumes them.
export function predict(modelRef: string, imagePath: string, page: Page): PredictionFile {
  if (!fs.existsSync(imagePath)) {
    throw new InputError(`page image not found: ${imagePath}`);
  }
  const model = loadModel(modelRef);

  const tags: PredictionFile["tags"] = [];
  const misaligned: number[] = [];
  for (const tok of page.tokens) {
    const subwords = subwordize(tok.text);
    const out = model.tagSubwords(tok.id, subwords);
    if (subwords.length === 0 || out.tags.length !== subwords.length) {
      misaligned.push(tok.id);
      continue;
    }
    tags.push({ token_id: tok.id, tag: out.tags[0], confidence: out.confidence });
  }
  if (misaligned.length) {
    throw new AlignmentError(
      `subword output does not align with tokens: ${misaligned.join(", ")}`,
      misaligned
    );
  }

  const pred = validatePredictions({
    schema_version: "1",
    page_no: page.page_no,
    tags,
  });
  checkTokenCoverage(pred, page);
  return pred;
}

export function predictToFile(
  modelRef: string,
  imagePath: string,
  pagePath: string,
  outPath: string
): PredictionFile {
  const pred = predict(modelRef, imagePath, readPage(pagePath));
  writeJson(outPath, pred);
  return pred;
}
