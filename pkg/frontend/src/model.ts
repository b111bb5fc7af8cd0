// Model-file types (schema hdprior/1) and client-side validation.
//
// The checks mirror the server's: anything that passes here must be
// accepted by POST /api/models (the schema-parity test holds the two
// implementations together over the template corpus). Validation returns a
// list of problems with JSON-ish paths so the editor can flag fields inline.

export type EffectKind = "iid" | "rw1" | "rw2" | "besag" | "fixed_cov";

export interface Effect {
  name: string;
  kind: EffectKind;
  size?: number;
  index_map?: number[];
  adjacency?: number[][];
  graph?: string;
  matrix?: number[][];
  prescaled?: boolean;
  constraints?: number[][];
}

export interface PriorBlock {
  type: "pc" | "dirichlet";
  median?: number;
  concentration?: number;
}

export type TreeNode = LeafNode | SplitNode;

export interface LeafNode {
  leaf: string;
}

export interface SplitNode {
  children: TreeNode[];
  base?: number[];
  prior?: PriorBlock;
}

export interface TotalBlock {
  type: "jeffreys" | "pc";
  rate?: number;
  tail?: { upper: number; alpha: number };
  odds?: { lower: number; upper: number; prob: number };
  alpha?: number;
}

export interface ModelFile {
  schema: string;
  name?: string;
  n: number;
  likelihood: "gaussian" | "binomial" | "poisson" | "nongaussian";
  effects: Effect[];
  tree: TreeNode;
  residual?: { effect: string; median?: number };
  total: TotalBlock;
}

export interface Problem {
  path: string;
  message: string;
}

export function isLeaf(node: TreeNode): node is LeafNode {
  return (node as LeafNode).leaf !== undefined;
}

const LIKELIHOODS = ["gaussian", "binomial", "poisson", "nongaussian"];
const KINDS: EffectKind[] = ["iid", "rw1", "rw2", "besag", "fixed_cov"];

export function treeLeaves(node: TreeNode): string[] {
  if (isLeaf(node)) return [node.leaf];
  return node.children.flatMap(treeLeaves);
}

function validateEffect(e: Effect, path: string, n: number, out: Problem[]): void {
  if (!e.name) out.push({ path: `${path}.name`, message: "effect needs a name" });
  if (!KINDS.includes(e.kind)) {
    out.push({ path: `${path}.kind`, message: `unknown kind '${e.kind}'` });
    return;
  }
  let size = e.size ?? 0;
  if (e.kind === "besag") {
    if (!e.adjacency && !e.graph) {
      out.push({ path, message: "besag needs 'adjacency' (or a graph file path)" });
      return;
    }
    if (e.adjacency) {
      size = e.adjacency.length;
      e.adjacency.forEach((neigh, i) => {
        for (const j of neigh) {
          if (j < 1 || j > size)
            out.push({ path: `${path}.adjacency[${i}]`, message: `neighbor ${j} out of range` });
          else if (j === i + 1)
            out.push({ path: `${path}.adjacency[${i}]`, message: "self-loop" });
          else if (!e.adjacency![j - 1].includes(i + 1))
            out.push({ path: `${path}.adjacency[${i}]`, message: `edge ${i + 1}-${j} is not symmetric` });
        }
      });
    }
  } else if (e.kind === "fixed_cov") {
    if (!e.matrix) {
      out.push({ path, message: "fixed_cov needs a matrix" });
      return;
    }
    size = e.matrix.length;
  }
  if (size < 1) out.push({ path: `${path}.size`, message: "size must be >= 1" });
  if (e.kind === "rw1" && size < 2) out.push({ path: `${path}.size`, message: "rw1 needs size >= 2" });
  if (e.kind === "rw2" && size < 3) out.push({ path: `${path}.size`, message: "rw2 needs size >= 3" });
  if (e.index_map) {
    if (e.index_map.length !== n)
      out.push({ path: `${path}.index_map`, message: `length ${e.index_map.length}, expected n = ${n}` });
    for (const k of e.index_map) {
      if (!Number.isInteger(k) || k < 1 || k > size) {
        out.push({ path: `${path}.index_map`, message: `entries must lie in 1..${size}` });
        break;
      }
    }
  } else if (size !== n) {
    out.push({ path, message: `no index map and size ${size} != n ${n}` });
  }
}

function validateNode(node: TreeNode, path: string, out: Problem[]): void {
  if (isLeaf(node)) {
    if (!node.leaf) out.push({ path, message: "leaf needs an effect name" });
    return;
  }
  const kids = node.children ?? [];
  if (kids.length < 2) {
    out.push({ path, message: "a split needs at least two children" });
    return;
  }
  const k = kids.length;
  // overlap check
  const seen = new Set<string>();
  kids.forEach((child, i) => {
    for (const name of treeLeaves(child)) {
      if (seen.has(name))
        out.push({ path: `${path}.children[${i}]`, message: `children overlap on '${name}'` });
      seen.add(name);
    }
  });
  const base = node.base ?? Array(k).fill(1 / k);
  if (base.length !== k) {
    out.push({ path: `${path}.base`, message: `base has ${base.length} entries for ${k} children` });
  } else {
    const sum = base.reduce((a, b) => a + b, 0);
    if (base.some((b) => b < 0 || b > 1) || Math.abs(sum - 1) > 1e-9)
      out.push({ path: `${path}.base`, message: "base must be a point in the closed simplex" });
  }
  const prior = node.prior ?? { type: "dirichlet" };
  if (prior.type === "pc") {
    if (prior.concentration !== undefined)
      out.push({ path: `${path}.prior`, message: "'concentration' belongs to dirichlet priors" });
    if (prior.median !== undefined && (prior.median <= 0 || prior.median >= 1))
      out.push({ path: `${path}.prior.median`, message: "median must be in (0, 1)" });
    const b0 = base[0];
    if (k === 2 && prior.median !== undefined && b0 !== 0 && b0 !== 1)
      out.push({
        path: `${path}.prior`,
        message: "interior-base pc splits use the interval rule; remove 'median'",
      });
    if (k > 2) {
      if (prior.median !== undefined)
        out.push({ path: `${path}.prior`, message: "multi-way pc splits take no median" });
      if (base.some((b) => Math.abs(b - 1 / k) > 1e-9))
        out.push({ path: `${path}.base`, message: "a multi-way pc split needs an equal base" });
    }
  } else if (prior.type === "dirichlet") {
    if (prior.median !== undefined)
      out.push({ path: `${path}.prior`, message: "'median' belongs to pc priors" });
    if (prior.concentration !== undefined && prior.concentration <= 0)
      out.push({ path: `${path}.prior.concentration`, message: "concentration must be positive" });
  } else {
    out.push({ path: `${path}.prior.type`, message: "expected 'pc' or 'dirichlet'" });
  }
  kids.forEach((child, i) => validateNode(child, `${path}.children[${i}]`, out));
}

export function validateModel(mf: ModelFile): Problem[] {
  const out: Problem[] = [];
  if (mf.schema !== "hdprior/1")
    out.push({ path: "schema", message: `expected 'hdprior/1', got '${mf.schema}'` });
  if (!Number.isInteger(mf.n) || mf.n < 1)
    out.push({ path: "n", message: "n must be a positive integer" });
  if (!LIKELIHOODS.includes(mf.likelihood))
    out.push({ path: "likelihood", message: `expected one of ${LIKELIHOODS.join(", ")}` });
  if (!mf.effects?.length) {
    out.push({ path: "effects", message: "at least one effect is required" });
    return out;
  }
  const names = mf.effects.map((e) => e.name);
  if (new Set(names).size !== names.length)
    out.push({ path: "effects", message: "effect names must be unique" });
  mf.effects.forEach((e, i) => validateEffect(e, `effects[${i}]`, mf.n, out));

  const gaussian = mf.likelihood === "gaussian";
  if (mf.residual) {
    if (!gaussian) out.push({ path: "residual", message: "only gaussian models have a residual" });
    if (!names.includes(mf.residual.effect))
      out.push({ path: "residual.effect", message: `'${mf.residual.effect}' is not a declared effect` });
    const m = mf.residual.median;
    if (m !== undefined && (m <= 0 || m >= 1))
      out.push({ path: "residual.median", message: "median must be in (0, 1)" });
  }
  if (mf.total?.type === "jeffreys") {
    if (!gaussian) out.push({ path: "total", message: "jeffreys needs a gaussian likelihood" });
    if (!mf.residual) out.push({ path: "total", message: "jeffreys needs a 'residual' block" });
  } else if (mf.total?.type === "pc") {
    if (mf.residual)
      out.push({ path: "total", message: "a proper pc total cannot be combined with a residual block" });
    const given = ["rate", "tail", "odds"].filter((key) => (mf.total as any)[key] !== undefined);
    if (given.length !== 1)
      out.push({ path: "total", message: "give exactly one of 'rate', 'tail', 'odds'" });
  } else {
    out.push({ path: "total.type", message: "expected 'jeffreys' or 'pc'" });
  }

  validateNode(mf.tree, "tree", out);
  const leaves = treeLeaves(mf.tree);
  const expected = names.filter((nme) => nme !== mf.residual?.effect);
  const missing = expected.filter((nme) => !leaves.includes(nme));
  const extra = leaves.filter((nme) => !expected.includes(nme));
  if (missing.length)
    out.push({ path: "tree", message: `effects missing from the tree: ${missing.join(", ")}` });
  if (extra.length)
    out.push({ path: "tree", message: `tree leaves that are not declared effects: ${extra.join(", ")}` });
  return out;
}

// ---------------------------------------------------------------------------
// editor transforms (pure: they return a fresh tree)
// ---------------------------------------------------------------------------

export function cloneTree<T extends TreeNode>(node: T): T {
  return JSON.parse(JSON.stringify(node));
}

/** Preorder list of split nodes, matching the server's split indexing of the
 * file tree (1-based). */
export function splitNodes(node: TreeNode): SplitNode[] {
  if (isLeaf(node)) return [];
  const here = node as SplitNode;
  return [here, ...here.children.flatMap(splitNodes)];
}

/** Move one effect into another child of the given split.
 *
 * The child count of the split never changes: moving the last effect out of
 * a child is refused (delete branches by editing the file instead).  Inside
 * the source child the effect's leaf is removed and degenerate single-child
 * sub-splits collapse; the target child gains the leaf, becoming an
 * ignorance sub-split when it was a single leaf.  Structural changes reset
 * the affected nodes' base/prior to the ignorance defaults.
 */
export function moveEffect(
  root: TreeNode,
  splitIndex: number,
  effect: string,
  targetChild: number,
): TreeNode {
  const out = cloneTree(root);
  const split = splitNodes(out)[splitIndex - 1];
  if (!split) throw new Error(`no split ${splitIndex}`);
  if (targetChild < 0 || targetChild >= split.children.length)
    throw new Error(`no child ${targetChild}`);
  const from = split.children.findIndex((c) => treeLeaves(c).includes(effect));
  if (from < 0) throw new Error(`effect '${effect}' is not under split ${splitIndex}`);
  if (from === targetChild) return out;
  if (treeLeaves(split.children[from]).length === 1)
    throw new Error(`moving '${effect}' would empty a branch`);

  const strip = (node: TreeNode): TreeNode | null => {
    if (isLeaf(node)) return node.leaf === effect ? null : node;
    const children = node.children
      .map(strip)
      .filter((c): c is TreeNode => c !== null);
    if (children.length === 0) return null;
    if (children.length === 1) return children[0];
    if (children.length !== node.children.length) {
      return { children, prior: node.prior?.type === "dirichlet" ? node.prior : undefined };
    }
    return { ...node, children };
  };

  const target = split.children[targetChild];
  const grown: TreeNode = isLeaf(target)
    ? { children: [target, { leaf: effect }], prior: { type: "dirichlet" } }
    : {
        children: [...target.children, { leaf: effect }],
        prior: target.prior?.type === "dirichlet" ? target.prior : { type: "dirichlet" },
      };
  split.children = split.children.map((c, i) =>
    i === from ? strip(c)! : i === targetChild ? grown : c,
  );
  return out;
}
