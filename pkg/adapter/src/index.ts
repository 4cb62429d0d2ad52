export { AlignmentError, CoverageError, InputError } from "./errors.js";
export { loadModel, type SubwordTagging, type TagModel } from "./backends.js";
export { exportFeatures, type FeatureExport, type FeatureMode, type FeatureRecord } from "./features.js";
export { predict, predictToFile, readJson, readPage, writeJson } from "./predict.js";
export {
  checkTokenCoverage,
  ENTITY_TYPES,
  groupsSchema,
  pageSchema,
  parseGroups,
  parsePage,
  predictionFileSchema,
  SCHEMA_VERSION,
  TAG_VOCAB,
  validatePredictions,
  type BBox,
  type GroupsDump,
  type Page,
  type PredictionFile,
  type Token,
} from "./schemas.js";
export { collapseToWordTag, subwordize } from "./subwords.js";
