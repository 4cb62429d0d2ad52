export class InputError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "InputError";
  }
}

// Predictions that do not cover the page's tokens exactly.
export class CoverageError extends Error {
  tokenIds: number[];

  constructor(message: string, tokenIds: number[]) {
    super(message);
    this.name = "CoverageError";
    this.tokenIds = tokenIds;
  }
}

// Subword output that cannot be mapped back onto OCR tokens.
export class AlignmentError extends Error {
  tokenIds: number[];

  constructor(message: string, tokenIds: number[]) {
    super(message);
    this.name = "AlignmentError";
    this.tokenIds = tokenIds;
  }
}
