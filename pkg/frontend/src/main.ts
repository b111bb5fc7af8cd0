// App wiring: DOM only. All logic lives in the tested modules (model,
// state, charts, tree_render, api).

import { ElicitClient, type DensityCurve, type Snapshot } from "./api";
import {
  makeScale,
  medianMarker,
  pathFor,
  shareBars,
  type Series,
} from "./charts";
import {
  moveEffect,
  treeLeaves,
  validateModel,
  type ModelFile,
  type PriorBlock,
} from "./model";
import { MAX_OVERLAYS, WorkbenchState } from "./state";
import { templateByName, templateIndex } from "./templates";
import { layoutTree } from "./tree_render";

const api = new ElicitClient("");
const state = new WorkbenchState();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  return el;
}

function status(message: string, isError = false): void {
  const el = $("status");
  el.textContent = message;
  el.className = isError ? "error" : "";
}

async function registerModel(model: ModelFile): Promise<void> {
  const problems = validateModel(model);
  if (problems.length) {
    status(`model rejected client-side: ${problems[0].path}: ${problems[0].message}`, true);
    return;
  }
  try {
    const snap = await api.createModel(model);
    await adopt(snap, model);
    status(`registered snapshot ${snap.id}`);
  } catch (err: any) {
    status(`server rejected the model: ${err.message}`, true);
  }
}

async function adopt(snap: Snapshot, modelFile?: ModelFile): Promise<void> {
  const mf = modelFile ?? (await api.getModel(snap.id)).model_file;
  state.push({ id: snap.id, calibration: snap.calibration, modelFile: mf });
  renderAll();
  await Promise.all([refreshDensity(), refreshShares()]);
}

// ---------------------------------------------------------------------------
// tree pane
// ---------------------------------------------------------------------------

function renderTree(): void {
  const host = $("tree-host");
  host.textContent = "";
  const snap = state.current;
  if (!snap) return;
  // render the assembled structure the report describes: file tree plus the
  // residual augmentation when present
  const mf = snap.modelFile;
  const root = mf.residual
    ? {
        children: [mf.tree, { leaf: mf.residual.effect }],
        base: [0, 1],
        prior: { type: "pc" as const, median: mf.residual.median },
      }
    : mf.tree;
  const layout = layoutTree(root);
  const svg = svgEl("svg", {
    viewBox: `0 0 ${layout.width} ${layout.height}`,
    width: Math.min(layout.width, 560),
  });
  const defs = svgEl("defs");
  const marker = svgEl("marker", {
    id: "arrow", viewBox: "0 0 8 8", refX: 7, refY: 4,
    markerWidth: 6, markerHeight: 6, orient: "auto-start-reverse",
  });
  marker.appendChild(svgEl("path", { d: "M0,0 L8,4 L0,8 z", fill: "#222" }));
  defs.appendChild(marker);
  svg.appendChild(defs);
  for (const e of layout.edges) {
    svg.appendChild(svgEl("path", {
      class: "tree-edge",
      d: `M${e.x0},${e.y0} L${e.x1},${e.y1}`,
    }));
    const label = svgEl("text", {
      class: "edge-label", x: (e.x0 + e.x1) / 2 - 10, y: (e.y0 + e.y1) / 2,
    });
    label.textContent = e.label;
    svg.appendChild(label);
  }
  // map layout split indices (over the rendered root) onto assembled report
  // indices: with a residual augmentation they already coincide (top = 1)
  for (const node of layout.nodes) {
    const g = svgEl("g", {
      class: [
        "tree-node",
        node.preferred ? "preferred" : "",
        node.splitIndex !== null ? "split" : "",
        node.splitIndex === state.selectedSplit ? "selected" : "",
      ].join(" "),
    });
    g.appendChild(svgEl("rect", {
      x: node.x - node.width / 2, y: node.y - 14, width: node.width, height: 28,
    }));
    const text = svgEl("text", { x: node.x, y: node.y + 1 });
    text.textContent = node.label;
    g.appendChild(text);
    if (node.splitIndex !== null) {
      const idx = node.splitIndex;
      g.addEventListener("click", () => {
        state.select(idx);
        renderAll();
        void refreshDensity();
      });
    }
    svg.appendChild(g);
  }
  host.appendChild(svg);
}

// ---------------------------------------------------------------------------
// split editor (move effects between children)
// ---------------------------------------------------------------------------

function renderEditor(): void {
  const host = $("editor-host");
  host.textContent = "";
  const snap = state.current;
  if (!snap) return;
  const cal = snap.calibration.splits[state.selectedSplit - 1];
  if (!cal) return;
  const title = document.createElement("div");
  title.innerHTML = `<b>Split ${cal.index}</b> partitions {${cal.parent.join(", ")}}`;
  host.appendChild(title);
  if (cal.origin[0] !== "tree") {
    const note = document.createElement("p");
    note.className = "hint";
    note.textContent =
      cal.origin[0] === "residual"
        ? "Residual augmentation: branch membership is fixed; tune the median below."
        : "Generated by multi-split expansion: edit the multi-way split instead.";
    host.appendChild(note);
    return;
  }
  const fileSplit = Number(cal.origin[1]);
  const movable = treeLeaves(snap.modelFile.tree).length > 2;
  cal.children.forEach((child, c) => {
    const line = document.createElement("div");
    line.append(`child ${c + 1}: {${child.join(", ")}} `);
    if (movable) {
      for (const effect of child) {
        const btn = document.createElement("button");
        btn.textContent = `${effect} →`;
        btn.title = `move ${effect} to the next child`;
        btn.addEventListener("click", () => {
          const target = (c + 1) % cal.children.length;
          try {
            const tree = moveEffect(snap.modelFile.tree, fileSplit, effect, target);
            void registerModel({ ...snap.modelFile, tree: tree as ModelFile["tree"] });
          } catch (err: any) {
            status(err.message, true);
          }
        });
        line.appendChild(btn);
      }
    }
    host.appendChild(line);
  });
}

// ---------------------------------------------------------------------------
// prior panel
// ---------------------------------------------------------------------------

function renderPriorPanel(): void {
  const host = $("prior-host");
  const problems = $("prior-problems");
  host.textContent = "";
  problems.textContent = "";
  const snap = state.current;
  if (!snap) return;
  const cal = snap.calibration.splits[state.selectedSplit - 1];
  if (!cal) return;

  const info = document.createElement("p");
  info.className = "hint";
  info.textContent =
    cal.prior === "pc"
      ? `PC prior, case ${cal.case}, rate ${fmt(cal.rate)}, median ${fmt(cal.median)}` +
        (cal.observations_used ? `, ${cal.observations_used} observations compared` : "")
      : `Dirichlet prior, order ${cal.children.length}, concentration ${fmt(cal.concentration)}`;
  host.appendChild(info);

  if (cal.origin[0] === "expanded") {
    const note = document.createElement("p");
    note.className = "hint";
    note.textContent = "Edit the original multi-way split; expanded splits recalibrate from it.";
    host.appendChild(note);
    return;
  }

  const typeSel = document.createElement("select");
  for (const t of ["pc", "dirichlet"]) {
    const opt = document.createElement("option");
    opt.value = t;
    opt.textContent = t === "pc" ? "PC (shrink toward the base)" : "Dirichlet (ignorance)";
    if (t === cal.prior) opt.selected = true;
    typeSel.appendChild(opt);
  }
  const typeLabel = document.createElement("label");
  typeLabel.append("prior ", typeSel);
  host.appendChild(typeLabel);
  if (cal.origin[0] === "residual") typeSel.disabled = true;

  const medianInput = document.createElement("input");
  medianInput.type = "number";
  medianInput.step = "0.01";
  medianInput.min = "0.01";
  medianInput.max = "0.99";
  medianInput.value = String(cal.median_deviation ?? 0.25);
  const medianLabel = document.createElement("label");
  medianLabel.append("deviation median ", medianInput);
  host.appendChild(medianLabel);

  const concInput = document.createElement("input");
  concInput.type = "number";
  concInput.step = "0.05";
  concInput.min = "0.01";
  concInput.value = String(cal.concentration ?? 1.0);
  const concLabel = document.createElement("label");
  concLabel.append("concentration ", concInput);
  host.appendChild(concLabel);

  const baseInputs: HTMLInputElement[] = [];
  if (cal.origin[0] === "tree") {
    const baseWrap = document.createElement("div");
    baseWrap.append("base model: ");
    cal.base.forEach((b, i) => {
      const input = document.createElement("input");
      input.type = "number";
      input.step = "0.05";
      input.min = "0";
      input.max = "1";
      input.value = String(b);
      input.style.width = "64px";
      baseInputs.push(input);
      const lab = document.createElement("label");
      lab.append(`child ${i + 1} `, input);
      baseWrap.appendChild(lab);
    });
    host.appendChild(baseWrap);
  }

  const sync = () => {
    const isPc = typeSel.value === "pc";
    const interior = baseInputs.length
      ? baseInputs.every((el) => Number(el.value) > 0 && Number(el.value) < 1)
      : false;
    medianLabel.style.display = isPc && !interior ? "" : "none";
    concLabel.style.display = isPc ? "none" : "";
  };
  typeSel.addEventListener("change", sync);
  baseInputs.forEach((el) => el.addEventListener("input", sync));
  sync();

  const submit = document.createElement("button");
  submit.textContent = "Submit prior";
  submit.addEventListener("click", () => void submitPrior());
  host.appendChild(submit);

  async function submitPrior(): Promise<void> {
    if (!snap) return;
    const isPc = typeSel.value === "pc";
    const block: PriorBlock & { base?: number[] } = { type: typeSel.value as "pc" | "dirichlet" };
    const base = baseInputs.map((el) => Number(el.value));
    const interior = base.length > 0 && base.every((b) => b > 0 && b < 1);
    if (isPc && !interior) block.median = Number(medianInput.value);
    if (!isPc) block.concentration = Number(concInput.value);
    if (baseInputs.length) {
      const sum = base.reduce((a, b) => a + b, 0);
      if (base.some((b) => b < 0 || b > 1) || Math.abs(sum - 1) > 1e-9) {
        problems.innerHTML = "<li>base must be a point in the closed simplex</li>";
        return;
      }
      block.base = base;
    }
    if (block.median !== undefined && (block.median <= 0 || block.median >= 1)) {
      problems.innerHTML = "<li>median must be in (0, 1)</li>";
      return;
    }
    try {
      const next = await api.updatePrior(snap.id, state.selectedSplit, block);
      await adopt(next);
      status(`snapshot ${next.id} calibrated`);
    } catch (err: any) {
      problems.innerHTML = `<li>${err.message}</li>`;
    }
  }
}

function fmt(v: number | null | undefined): string {
  return v === null || v === undefined ? "-" : Number(v).toPrecision(4);
}

// ---------------------------------------------------------------------------
// charts
// ---------------------------------------------------------------------------

const DENSITY_BOX = { width: 520, height: 260, pad: 34 };
const SHARES_BOX = { width: 520, height: 220, pad: 34 };

async function refreshDensity(): Promise<void> {
  const snap = state.current;
  if (!snap) return;
  const split = state.selectedSplit;
  const wanted = snap.id;
  const curves: { curve: DensityCurve; cls: string }[] = [];
  try {
    curves.push({ curve: await api.getDensity(snap.id, split), cls: "current" });
    for (let i = 0; i < state.overlays.length; i++) {
      const o = state.overlays[i];
      if (split <= o.calibration.splits.length) {
        curves.push({ curve: await api.getDensity(o.id, split), cls: `overlay-${i}` });
      }
    }
  } catch (err: any) {
    status(`density fetch failed: ${err.message}`, true);
    return;
  }
  if (!state.isCurrent(wanted)) return; // stale response, a newer snapshot landed
  drawDensity(curves);
}

function drawDensity(curves: { curve: DensityCurve; cls: string }[]): void {
  const host = $("density-host");
  host.textContent = "";
  const logY = ($("log-toggle") as HTMLInputElement).checked;
  const showCdf = ($("cdf-toggle") as HTMLInputElement).checked;
  const series: Series[] = curves.map(({ curve }) => ({
    x: curve.omega,
    y: showCdf ? curve.cdf : curve.log_density.map(Math.exp),
  }));
  const scale = makeScale(series, DENSITY_BOX, logY && !showCdf);
  const svg = svgEl("svg", {
    viewBox: `0 0 ${DENSITY_BOX.width} ${DENSITY_BOX.height}`,
    width: DENSITY_BOX.width,
  });
  svg.appendChild(svgEl("line", {
    class: "axis",
    x1: scale.x(0), y1: DENSITY_BOX.height - DENSITY_BOX.pad,
    x2: scale.x(1), y2: DENSITY_BOX.height - DENSITY_BOX.pad,
  }));
  for (const tick of [0, 0.25, 0.5, 0.75, 1]) {
    const label = svgEl("text", {
      class: "axis-label", x: scale.x(tick) - 6, y: DENSITY_BOX.height - DENSITY_BOX.pad + 14,
    });
    label.textContent = String(tick);
    svg.appendChild(label);
  }
  series.forEach((s, i) => {
    svg.appendChild(svgEl("path", { class: `curve ${curves[i].cls}`, d: pathFor(s, scale) }));
  });
  // median marker from the current snapshot's server curve
  const current = curves[0].curve;
  const marker = medianMarker(current.omega, current.cdf, scale, DENSITY_BOX);
  svg.appendChild(svgEl("line", {
    class: "median-line", x1: marker.x, y1: marker.y0, x2: marker.x, y2: marker.y1,
  }));
  const mlabel = svgEl("text", { class: "median-label", x: marker.x + 4, y: marker.y0 + 10 });
  mlabel.textContent = `median ${marker.omega.toFixed(3)}`;
  svg.appendChild(mlabel);
  host.appendChild(svg);

  const overlayList = $("overlay-list");
  overlayList.textContent = "";
  state.overlays.forEach((o, i) => {
    const chip = document.createElement("span");
    chip.className = `overlay-chip overlay-${i}`;
    chip.textContent = o.id;
    const remove = document.createElement("button");
    remove.textContent = "x";
    remove.addEventListener("click", () => {
      state.removeOverlay(o.id);
      renderAll();
      void refreshDensity();
    });
    chip.appendChild(remove);
    overlayList.appendChild(chip);
  });
}

async function refreshShares(): Promise<void> {
  const snap = state.current;
  if (!snap) return;
  const wanted = snap.id;
  try {
    const marginals = await api.getMarginals(snap.id, 20000, 1);
    if (!state.isCurrent(wanted)) return;
    const host = $("shares-host");
    host.textContent = "";
    const { bars, slot } = shareBars(marginals.leaf_shares, SHARES_BOX);
    const svg = svgEl("svg", {
      viewBox: `0 0 ${SHARES_BOX.width} ${SHARES_BOX.height}`,
      width: SHARES_BOX.width,
    });
    const y = (v: number) =>
      SHARES_BOX.height - SHARES_BOX.pad - v * (SHARES_BOX.height - 2 * SHARES_BOX.pad);
    const boxW = Math.min(34, slot * 0.5);
    for (const bar of bars) {
      svg.appendChild(svgEl("line", {
        class: "share-whisker", x1: bar.x, y1: y(bar.q[0]), x2: bar.x, y2: y(bar.q[4]),
      }));
      svg.appendChild(svgEl("rect", {
        class: "share-box", x: bar.x - boxW / 2, y: y(bar.q[3]),
        width: boxW, height: Math.max(y(bar.q[1]) - y(bar.q[3]), 1),
      }));
      svg.appendChild(svgEl("line", {
        class: "share-median",
        x1: bar.x - boxW / 2, y1: y(bar.q[2]), x2: bar.x + boxW / 2, y2: y(bar.q[2]),
      }));
      const label = svgEl("text", {
        class: "share-label", x: bar.x, y: SHARES_BOX.height - SHARES_BOX.pad + 14,
      });
      label.textContent = bar.label;
      svg.appendChild(label);
    }
    host.appendChild(svg);
  } catch (err: any) {
    status(`marginals fetch failed: ${err.message}`, true);
  }
}

// ---------------------------------------------------------------------------
// raw JSON editor
// ---------------------------------------------------------------------------

function wireRawEditor(): void {
  const textarea = $("raw-json") as HTMLTextAreaElement;
  const list = $("raw-problems");
  $("raw-validate").addEventListener("click", () => {
    list.textContent = "";
    try {
      const problems = validateModel(JSON.parse(textarea.value));
      if (!problems.length) {
        status("model file is valid client-side");
        return;
      }
      for (const p of problems) {
        const li = document.createElement("li");
        li.textContent = `${p.path}: ${p.message}`;
        list.appendChild(li);
      }
    } catch (err: any) {
      list.innerHTML = `<li>not valid JSON: ${err.message}</li>`;
    }
  });
  $("raw-submit").addEventListener("click", () => {
    try {
      void registerModel(JSON.parse(textarea.value));
    } catch (err: any) {
      list.innerHTML = `<li>not valid JSON: ${err.message}</li>`;
    }
  });
}

// ---------------------------------------------------------------------------
// top-level wiring
// ---------------------------------------------------------------------------

function renderAll(): void {
  const snap = state.current;
  $("snapshot-id").textContent = snap ? `snapshot ${snap.id}` : "";
  ($("undo") as HTMLButtonElement).disabled = !state.canUndo;
  ($("pin-overlay") as HTMLButtonElement).disabled =
    !snap || state.overlays.length >= MAX_OVERLAYS;
  renderTree();
  renderEditor();
  renderPriorPanel();
  if (snap) {
    ($("raw-json") as HTMLTextAreaElement).value = JSON.stringify(snap.modelFile, null, 2);
  }
}

function init(): void {
  const select = $("template-select") as HTMLSelectElement;
  for (const entry of templateIndex) {
    const opt = document.createElement("option");
    opt.value = entry.name;
    opt.textContent = entry.label;
    select.appendChild(opt);
  }
  $("load-template").addEventListener("click", () => {
    void registerModel(templateByName(select.value));
  });
  $("undo").addEventListener("click", () => {
    const prev = state.undo();
    if (prev) {
      renderAll();
      void refreshDensity();
      void refreshShares();
      status(`restored snapshot ${prev.id}`);
    }
  });
  $("pin-overlay").addEventListener("click", () => {
    const snap = state.current;
    if (snap && state.addOverlay(snap)) {
      renderAll();
      void refreshDensity();
    }
  });
  $("log-toggle").addEventListener("change", () => void refreshDensity());
  $("cdf-toggle").addEventListener("change", () => void refreshDensity());
  wireRawEditor();
  status("load a template to begin");
}

init();
