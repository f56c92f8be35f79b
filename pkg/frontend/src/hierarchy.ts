/** Partition-hierarchy editor model for the modal dendrogram view.
 *
 * The server owns the tree; this model turns editor gestures (drag entries
 * into a group, rename, reorder siblings, per-branch collapse toggles) into
 * POST /view edits and keeps the header color assignment for grouped
 * entries. Server rejections (duplicate names, cyclic moves) surface as
 * inline errors without local state changes.
 */

import { ApiError, type EngineClient } from './api.js';
import type { Axis, AxisEntry, HierarchyEdit } from './types.js';

const GROUP_HEADER_COLORS = [
  '#8c6bb1', '#41ab5d', '#ef6548', '#4292c6', '#d4a017', '#7bccc4',
];

export interface EditOutcome {
  ok: boolean;
  error?: string;
  axis?: { rows: AxisEntry[]; cols: AxisEntry[] };
}

export class HierarchyEditor {
  lastError: string | null = null;
  private groupColors = new Map<string, string>();

  constructor(private readonly client: EngineClient) {}

  /** Stable header color per group name ("visually indicated by color"). */
  colorFor(group: string): string {
    let color = this.groupColors.get(group);
    if (!color) {
      color = GROUP_HEADER_COLORS[this.groupColors.size % GROUP_HEADER_COLORS.length];
      this.groupColors.set(group, color);
    }
    return color;
  }

  private async send(axis: Axis, edit: HierarchyEdit): Promise<EditOutcome> {
    this.lastError = null;
    try {
      const result = await this.client.editHierarchy(axis, edit);
      return { ok: true, axis: result.axis };
    } catch (err) {
      this.lastError = err instanceof ApiError ? err.message : String(err);
      return { ok: false, error: this.lastError };
    }
  }

  /** Drag a set of entries into a new group. */
  groupEntries(axis: Axis, name: string, members: (number | string)[]): Promise<EditOutcome> {
    return this.send(axis, { op: 'create_group', name, members });
  }

  moveEntry(
    axis: Axis, entry: number | string, parent: string, position?: number,
  ): Promise<EditOutcome> {
    return this.send(axis, { op: 'move_entry', entry, parent, position });
  }

  rename(axis: Axis, oldName: string, newName: string): Promise<EditOutcome> {
    return this.send(axis, { op: 'rename', old: oldName, new: newName });
  }

  dissolveGroup(axis: Axis, name: string): Promise<EditOutcome> {
    return this.send(axis, { op: 'delete_group', name, cascade: true });
  }

  reorderSiblings(
    axis: Axis, parent: string, order: (number | string)[],
  ): Promise<EditOutcome> {
    return this.send(axis, { op: 'reorder_siblings', parent, order });
  }

  async setCollapse(axis: Axis, group: string, collapsed: boolean): Promise<EditOutcome> {
    this.lastError = null;
    try {
      const result = await this.client.setCollapse(axis, group, collapsed);
      return { ok: true, axis: result.axis };
    } catch (err) {
      this.lastError = err instanceof ApiError ? err.message : String(err);
      return { ok: false, error: this.lastError };
    }
  }
}
