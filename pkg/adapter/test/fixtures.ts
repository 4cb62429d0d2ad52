import path from "path";
import { fileURLToPath } from "url";
import { readJson, readPage } from "../src/predict.js";
import { parseGroups, type GroupsDump, type Page } from "../src/schemas.js";

const here = path.dirname(fileURLToPath(import.meta.url));

export function fixturePath(name: string): string {
  return path.join(here, "fixtures", name);
}

export function loadFixturePage(stem: string): Page {
  return readPage(fixturePath(`${stem}.ocr.json`));
}

export function loadFixtureGroups(stem: string): GroupsDump {
  return parseGroups(readJson(fixturePath(`${stem}.groups.json`)));
}

export const FIXTURE_STEMS = ["page_0001", "page_0002", "page_0003"] as const;
