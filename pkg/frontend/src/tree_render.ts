// Tree layout for SVG rendering. Boxes hold the node's effect set; a child
// is shaded gray when the split's base model prefers it (its base weight is
// the largest in the split), matching the figure convention for preferred
// branches.

import { isLeaf, splitNodes, treeLeaves, type TreeNode } from "./model";

export interface LaidOutNode {
  label: string;
  x: number;
  y: number;
  width: number;
  preferred: boolean;
  splitIndex: number | null; // the split this node is the parent of
  parentSplit: number | null; // the split this node is a child of
  childPos: number | null;
  baseWeight: number | null;
  depth: number;
}

export interface LaidOutEdge {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  label: string;
}

export interface TreeLayout {
  nodes: LaidOutNode[];
  edges: LaidOutEdge[];
  width: number;
  height: number;
}

const LEVEL_H = 64;
const CHAR_W = 7.2;
const PAD_X = 14;
const GAP = 18;

function labelOf(node: TreeNode): string {
  return treeLeaves(node).join(", ");
}

export function layoutTree(root: TreeNode): TreeLayout {
  const splits = splitNodes(root);
  const nodes: LaidOutNode[] = [];
  const edges: LaidOutEdge[] = [];

  // first pass: subtree widths
  const widthOf = (node: TreeNode): number => {
    const self = labelOf(node).length * CHAR_W + 2 * PAD_X;
    if (isLeaf(node)) return self;
    const kids = node.children.map(widthOf);
    const total = kids.reduce((a, b) => a + b, 0) + GAP * (node.children.length - 1);
    return Math.max(self, total);
  };

  let maxDepth = 0;
  const place = (
    node: TreeNode,
    x0: number,
    depth: number,
    parentSplit: number | null,
    childPos: number | null,
    baseWeight: number | null,
    preferred: boolean,
  ): LaidOutNode => {
    const w = widthOf(node);
    const label = labelOf(node);
    const boxW = label.length * CHAR_W + 2 * PAD_X;
    const cx = x0 + w / 2;
    maxDepth = Math.max(maxDepth, depth);
    const mine: LaidOutNode = {
      label,
      x: cx,
      y: depth * LEVEL_H + 24,
      width: boxW,
      preferred,
      splitIndex: isLeaf(node) ? null : splits.indexOf(node) + 1,
      parentSplit,
      childPos,
      baseWeight,
      depth,
    };
    nodes.push(mine);
    if (!isLeaf(node)) {
      const split = node;
      const base = split.base ?? split.children.map(() => 1 / split.children.length);
      const top = Math.max(...base);
      let childX = x0 + (w - (split.children.map(widthOf).reduce((a, b) => a + b, 0) + GAP * (split.children.length - 1))) / 2;
      split.children.forEach((child, i) => {
        const cw = widthOf(child);
        const placed = place(
          child,
          childX,
          depth + 1,
          splits.indexOf(node) + 1,
          i,
          base[i],
          base[i] > 0 && Math.abs(base[i] - top) < 1e-12,
        );
        edges.push({
          x0: cx,
          y0: mine.y + 14,
          x1: placed.x,
          y1: placed.y - 14,
          label: formatBase(base[i]),
        });
        childX += cw + GAP;
      });
    }
    return mine;
  };

  place(root, 0, 0, null, null, null, false);
  return {
    nodes,
    edges,
    width: widthOf(root) + 20,
    height: (maxDepth + 1) * LEVEL_H + 30,
  };
}

function formatBase(b: number): string {
  if (b === 0 || b === 1) return String(b);
  for (const den of [2, 3, 4, 5, 6]) {
    for (let num = 1; num < den; num++) {
      if (Math.abs(b - num / den) < 1e-9) return `${num}/${den}`;
    }
  }
  return b.toFixed(2);
}
