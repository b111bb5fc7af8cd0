// Workbench state: which snapshot is current, which split is selected, what
// edits are staged, which snapshots are overlaid. Edits stay local until
// submitted; every displayed curve belongs to a server snapshot id, and the
// copy-on-write server registry makes the id history a free undo stack.

import type { Calibration } from "./api";
import type { ModelFile } from "./model";

export const MAX_OVERLAYS = 3;

export interface SnapshotRef {
  id: string;
  calibration: Calibration;
  modelFile: ModelFile;
}

export class WorkbenchState {
  current: SnapshotRef | null = null;
  selectedSplit = 1;
  stagedPrior: Record<string, unknown> | null = null;
  overlays: SnapshotRef[] = [];
  private history: SnapshotRef[] = [];

  /** Register a fresh snapshot (template load or submitted edit). */
  push(snapshot: SnapshotRef): void {
    if (this.current) this.history.push(this.current);
    this.current = snapshot;
    this.stagedPrior = null;
    if (this.selectedSplit > snapshot.calibration.splits.length) {
      this.selectedSplit = 1;
    }
  }

  /** Restore the previous snapshot id; returns it (old ids stay queryable
   * on the server, so this is pure bookkeeping). */
  undo(): SnapshotRef | null {
    const prev = this.history.pop();
    if (!prev) return null;
    this.current = prev;
    this.stagedPrior = null;
    return prev;
  }

  get canUndo(): boolean {
    return this.history.length > 0;
  }

  select(split: number): void {
    const count = this.current?.calibration.splits.length ?? 0;
    if (split < 1 || split > count) throw new Error(`no split ${split}`);
    this.selectedSplit = split;
    this.stagedPrior = null;
  }

  stage(edit: Record<string, unknown>): void {
    this.stagedPrior = { ...(this.stagedPrior ?? {}), ...edit };
  }

  /** Pin the current snapshot as an overlay (at most MAX_OVERLAYS, dedup). */
  addOverlay(snapshot: SnapshotRef): boolean {
    if (this.overlays.some((s) => s.id === snapshot.id)) return false;
    if (this.overlays.length >= MAX_OVERLAYS) return false;
    this.overlays.push(snapshot);
    return true;
  }

  removeOverlay(id: string): void {
    this.overlays = this.overlays.filter((s) => s.id !== id);
  }

  /** Discard responses for snapshots that are no longer current (stale
   * fetches resolve after the user moved on). */
  isCurrent(id: string): boolean {
    return this.current?.id === id;
  }
}
