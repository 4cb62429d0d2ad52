/*
 * Model backends. A backend sees one OCR token's subwords at a time and
 * returns one tag per subword. The real fine-tuned checkpoint is out of
 * scope here; "stub" gives the degenerate all-O model and "fixture" replays
 * per-token subword tags from a JSON file, which is how tests exercise the
 * alignment and collapse paths without network or weights.
 */

import fs from "fs";
import { z } from "zod";
import { InputError } from "./errors.js";
import { TAG_VOCAB } from "./schemas.js";

export interface SubwordTagging {
  tags: string[];
  confidence: number;
}

export interface TagModel {
  readonly name: string;
  tagSubwords(tokenId: number, subwords: string[]): SubwordTagging;
}

class StubModel implements TagModel {
  readonly name = "stub";

  tagSubwords(_tokenId: number, subwords: string[]): SubwordTagging {
    return { tags: subwords.map(() => "O"), confidence: 1.0 };
  }
}

const fixtureFileSchema = z.object({
  subword_tags: z.record(z.string(), z.array(z.string())),
  confidences: z.record(z.string(), z.number().min(0).max(1)).optional(),
});

class FixtureModel implements TagModel {
  readonly name: string;
  private tagsByToken: Map<number, string[]>;
  private confidences: Map<number, number>;

  constructor(path: string) {
    this.name = `fixture:${path}`;
    if (!fs.existsSync(path)) {
      throw new InputError(`model fixture not found: ${path}`);
    }
    let raw: unknown;
    try {
      raw = JSON.parse(fs.readFileSync(path, "utf-8"));
    } catch (err) {
      throw new InputError(`model fixture ${path} is not valid JSON: ${err}`);
    }
    const parsed = fixtureFileSchema.safeParse(raw);
    if (!parsed.success) {
      throw new InputError(
        `model fixture ${path}: ${parsed.error.issues[0].message}`
      );
    }
    this.tagsByToken = new Map();
    for (const [key, tags] of Object.entries(parsed.data.subword_tags)) {
      const bad = tags.filter((t) => !TAG_VOCAB.includes(t));
      if (bad.length) {
        throw new InputError(
          `model fixture ${path}: unknown tags for token ${key}: ${bad.join(", ")}`
        );
      }
      this.tagsByToken.set(Number(key), tags);
    }
    this.confidences = new Map(
      Object.entries(parsed.data.confidences ?? {}).map(([k, v]) => [Number(k), v])
    );
  }

  tagSubwords(tokenId: number, subwords: string[]): SubwordTagging {
    const tags = this.tagsByToken.get(tokenId);
    if (tags === undefined) {
      // unlisted tokens fall back to the stub behavior
      return { tags: subwords.map(() => "O"), confidence: 1.0 };
    }
    return { tags, confidence: this.confidences.get(tokenId) ?? 1.0 };
  }
}

export function loadModel(ref: string): TagModel {
  if (ref === "stub") return new StubModel();
  if (ref.startsWith("fixture:")) {
    return new FixtureModel(ref.slice("fixture:".length));
  }
  throw new InputError(
    `unknown model ref ${JSON.stringify(ref)}; use "stub" or "fixture:<path>"`
  );
}
