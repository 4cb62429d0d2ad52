/*
 * Training-feature export. Word mode passes each token's own box through;
 * segment mode replaces it with the box of the layout group the token
 * belongs to, so every token of one group carries an identical bbox.
 */

import { InputError } from "./errors.js";
import type { BBox, GroupsDump, Page } from "./schemas.js";

export type FeatureMode = "word" | "segment";

export interface FeatureRecord {
  token_id: number;
  text: string;
  bbox: BBox;
}

export interface FeatureExport {
  schema_version: "1";
  page_no: number;
  mode: FeatureMode;
  image: string;
  features: FeatureRecord[];
}

export function exportFeatures(
  page: Page,
  groups: GroupsDump | null,
  mode: FeatureMode,
  image: string
): FeatureExport {
  let boxFor: (tokenId: number, own: BBox) => BBox;

  if (mode === "word") {
    boxFor = (_id, own) => own;
  } else {
    if (groups === null) {
      throw new InputError("segment mode needs a layout grouping for the page");
    }
    if (groups.page_no !== page.page_no) {
      throw new InputError(
        `groups are for page ${groups.page_no}, page file is ${page.page_no}`
      );
    }
    const segmentBox = new Map<number, BBox>();
    for (const group of groups.groups) {
      for (const tokenId of group.token_ids) {
        segmentBox.set(tokenId, group.bbox);
      }
    }
    const orphans = page.tokens
      .filter((t) => !segmentBox.has(t.id))
      .map((t) => t.id);
    if (orphans.length) {
      throw new InputError(
        `tokens missing from the grouping: ${orphans.join(", ")}`
      );
    }
    boxFor = (id) => segmentBox.get(id)!;
  }

  return {
    schema_version: "1",
    page_no: page.page_no,
    mode,
    image,
    features: page.tokens.map((tok) => ({
      token_id: tok.id,
      text: tok.text,
      bbox: boxFor(tok.id, tok.bbox),
    })),
  };
}
