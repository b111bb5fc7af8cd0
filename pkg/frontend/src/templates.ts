// Shipped starting points, generated from the repository's model files by
// tools/make_frontend_templates.py (adjacency inlined for HTTP posting).

import type { ModelFile } from "./model";

import index from "./templates/index.json";
import kenya from "./templates/kenya.json";
import kenyaSim from "./templates/kenya_sim.json";
import latinSquare from "./templates/latin_square.json";
import latinSquareDual from "./templates/latin_square_dual.json";
import randomIntercept from "./templates/random_intercept.json";
import threeFlat from "./templates/three_effects_flat.json";
import threeNested from "./templates/three_effects_nested.json";

const byName: Record<string, unknown> = {
  three_effects_flat: threeFlat,
  three_effects_nested: threeNested,
  random_intercept: randomIntercept,
  latin_square: latinSquare,
  latin_square_dual: latinSquareDual,
  kenya_sim: kenyaSim,
  kenya: kenya,
};

export interface TemplateEntry {
  name: string;
  label: string;
}

export const templateIndex: TemplateEntry[] = index as TemplateEntry[];

export function templateByName(name: string): ModelFile {
  const tpl = byName[name];
  if (!tpl) throw new Error(`unknown template '${name}'`);
  // deep copy so editor mutations never touch the shipped template
  return JSON.parse(JSON.stringify(tpl)) as ModelFile;
}
