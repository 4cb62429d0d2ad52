/*
 * Wire formats shared with the extraction pipeline. The page and groups
 * schemas mirror what the pipeline writes; the prediction schema is what
 * it reads back through `--tagger file:<dir>`. Validation here must never
 * be looser than the pipeline's own readers.
 */

import { z } from "zod";
import { CoverageError, InputError } from "./errors.js";

export const SCHEMA_VERSION = "1";

export const ENTITY_TYPES = [
  "PatientName",
  "PatientDob",
  "PatientGender",
  "PatientAddress",
  "PhysicianName",
  "PhysicianAddress",
  "ExamProcedure",
  "ExamReason",
] as const;

// O plus B-/I- per entity type: 17 values.
export const TAG_VOCAB: readonly string[] = [
  "O",
  ...ENTITY_TYPES.flatMap((t) => [`B-${t}`, `I-${t}`]),
];

const bboxSchema = z
  .tuple([z.number(), z.number(), z.number(), z.number()])
  .refine(([x0, y0, x1, y1]) => x0 <= x1 && y0 <= y1, {
    message: "bbox must satisfy x0 <= x1 and y0 <= y1",
  });

export const pageSchema = z
  .object({
    schema_version: z.literal(SCHEMA_VERSION),
    page_no: z.number().int(),
    width_px: z.number().int().positive(),
    height_px: z.number().int().positive(),
    lines: z.array(z.object({ id: z.number().int(), bbox: bboxSchema })),
    tokens: z.array(
      z.object({
        id: z.number().int(),
        text: z.string(),
        bbox: bboxSchema,
        line_id: z.number().int(),
      })
    ),
  })
  .superRefine((page, ctx) => {
    const lineIds = new Set<number>();
    for (const line of page.lines) {
      if (lineIds.has(line.id)) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `duplicate line id ${line.id}`,
        });
      }
      lineIds.add(line.id);
    }
    const tokenIds = new Set<number>();
    for (const tok of page.tokens) {
      if (tokenIds.has(tok.id)) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `duplicate token id ${tok.id}`,
        });
      }
      tokenIds.add(tok.id);
      if (!lineIds.has(tok.line_id)) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `token ${tok.id} references missing line ${tok.line_id}`,
        });
      }
    }
  });

export type Page = z.infer<typeof pageSchema>;
export type Token = Page["tokens"][number];
export type BBox = z.infer<typeof bboxSchema>;

export const groupsSchema = z.object({
  schema_version: z.literal(SCHEMA_VERSION),
  page_no: z.number().int(),
  groups: z.array(
    z.object({
      group_id: z.number().int(),
      line_ids: z.array(z.number().int()),
      token_ids: z.array(z.number().int()),
      text: z.string(),
      bbox: bboxSchema,
      column_index: z.number().int(),
      rank: z.number().int(),
    })
  ),
  reading_order: z.array(z.number().int()),
});

export type GroupsDump = z.infer<typeof groupsSchema>;

const tagSchema = z
  .string()
  .refine((t) => TAG_VOCAB.includes(t), { message: "unknown BIO tag" });

export const predictionFileSchema = z
  .object({
    schema_version: z.literal(SCHEMA_VERSION),
    page_no: z.number().int(),
    tags: z.array(
      z.object({
        token_id: z.number().int(),
        tag: tagSchema,
        confidence: z.number().min(0).max(1),
      })
    ),
  })
  .superRefine((pred, ctx) => {
    const seen = new Set<number>();
    for (const rec of pred.tags) {
      if (seen.has(rec.token_id)) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `token ${rec.token_id} tagged more than once`,
        });
      }
      seen.add(rec.token_id);
    }
  });

export type PredictionFile = z.infer<typeof predictionFileSchema>;

function parseOrThrow<T>(schema: z.ZodType<T>, data: unknown, what: string): T {
  const result = schema.safeParse(data);
  if (!result.success) {
    const first = result.error.issues[0];
    const where = first.path.length ? ` at ${first.path.join(".")}` : "";
    throw new InputError(`${what}${where}: ${first.message}`);
  }
  return result.data;
}

export function parsePage(data: unknown): Page {
  return parseOrThrow(pageSchema, data, "page");
}

export function parseGroups(data: unknown): GroupsDump {
  return parseOrThrow(groupsSchema, data, "groups");
}

export function validatePredictions(data: unknown): PredictionFile {
  return parseOrThrow(predictionFileSchema, data, "predictions");
}

// Every page token carries exactly one tag; no stray ids.
export function checkTokenCoverage(pred: PredictionFile, page: Page): void {
  if (pred.page_no !== page.page_no) {
    throw new CoverageError(
      `predictions are for page ${pred.page_no}, paired page is ${page.page_no}`,
      []
    );
  }
  const tagged = new Set(pred.tags.map((r) => r.token_id));
  const onPage = new Set(page.tokens.map((t) => t.id));
  const missing = [...onPage].filter((id) => !tagged.has(id)).sort((a, b) => a - b);
  if (missing.length) {
    throw new CoverageError(
      `predictions missing tags for page tokens: ${missing.join(", ")}`,
      missing
    );
  }
  const stray = [...tagged].filter((id) => !onPage.has(id)).sort((a, b) => a - b);
  if (stray.length) {
    throw new CoverageError(
      `predictions reference tokens not on page: ${stray.join(", ")}`,
      stray
    );
  }
}
