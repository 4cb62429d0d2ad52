/*
 * Deterministic stand-in for a wordpiece tokenizer. Real checkpoints ship
 * their own vocab; what matters downstream is only the subword COUNT per
 * OCR token, so a fixed-width chunker keeps fixtures reproducible.
 */

const CHUNK = 4;

export function subwordize(text: string): string[] {
  if (text.length === 0) return [];
  const pieces: string[] = [];
  for (let i = 0; i < text.length; i += CHUNK) {
    const chunk = text.slice(i, i + CHUNK);
    pieces.push(i === 0 ? chunk : `##${chunk}`);
  }
  return pieces;
}

// First-subword convention: the word-level tag is the first subword's tag.
export function collapseToWordTag(subwordTags: string[]): string {
  if (subwordTags.length === 0) {
    throw new RangeError("cannot collapse an empty subword tag list");
  }
  return subwordTags[0];
}
