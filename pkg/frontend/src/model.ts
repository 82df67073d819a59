/**
 * Client-side replica of one graph model.
 *
 * The browser never enforces constraints — the server is authoritative and
 * reverts anything it refuses — so application here is always "absolute":
 * committed commands take effect even when local state disagrees.
 */

import type { Command, RestoreElement } from "./protocol.js";

export interface ElementState {
  meta: "node" | "container" | "edge";
  id: string;
  typeName: string;
  attributes: Record<string, unknown[]>;
  version: number;
  // node/container
  x?: number;
  y?: number;
  width?: number;
  height?: number;
  containerId?: string;
  children?: string[];
  // edge
  sourceId?: string;
  targetId?: string;
  bendPoints?: [number, number][];
}

export interface Snapshot {
  id: string;
  typeName: string;
  attributes: Record<string, unknown[]>;
  rootChildren: string[];
  modelVersion: number;
  routing: Record<string, unknown>;
  elements: ElementState[];
}

export class Replica {
  id: string;
  typeName: string;
  attributes: Record<string, unknown[]>;
  rootChildren: string[];
  modelVersion: number;
  routing: Record<string, unknown>;
  elements: Map<string, ElementState>;
  /** Concrete container type names, from the /meta document. */
  containerTypes: Set<string>;

  constructor(snapshot: Snapshot, containerTypes: Iterable<string>) {
    this.id = snapshot.id;
    this.typeName = snapshot.typeName;
    this.attributes = { ...snapshot.attributes };
    this.rootChildren = [...snapshot.rootChildren];
    this.modelVersion = snapshot.modelVersion;
    this.routing = { ...snapshot.routing };
    this.containerTypes = new Set(containerTypes);
    this.elements = new Map();
    for (const el of snapshot.elements) {
      this.elements.set(el.id, structuredClone(el));
    }
  }

  private childList(containerId: string): string[] | undefined {
    if (containerId === this.id) return this.rootChildren;
    return this.elements.get(containerId)?.children;
  }

  private detach(elementId: string, containerId: string | undefined): void {
    if (containerId === undefined) return;
    const list = this.childList(containerId);
    if (!list) return;
    const idx = list.indexOf(elementId);
    if (idx >= 0) list.splice(idx, 1);
  }

  private attach(elementId: string, containerId: string): void {
    const list = this.childList(containerId);
    if (list && !list.includes(elementId)) list.push(elementId);
  }

  /** Apply one committed command absolutely. */
  apply(cmd: Command): void {
    switch (cmd.type) {
      case "CreateNode": {
        const meta = this.containerTypes.has(cmd.typeName) ? "container" : "node";
        const el: ElementState = {
          meta,
          id: cmd.id,
          typeName: cmd.typeName,
          x: cmd.x,
          y: cmd.y,
          width: cmd.width,
          height: cmd.height,
          containerId: cmd.containerId,
          attributes: structuredClone(cmd.initialAttributes ?? {}),
          version: cmd.version ?? 0,
        };
        if (meta === "container") el.children = [];
        this.elements.set(cmd.id, el);
        this.attach(cmd.id, cmd.containerId);
        break;
      }
      case "DeleteNode":
      case "DeleteEdge": {
        const el = this.elements.get(cmd.id);
        if (el?.containerId !== undefined) this.detach(cmd.id, el.containerId);
        this.elements.delete(cmd.id);
        break;
      }
      case "MoveNode": {
        const el = this.elements.get(cmd.id);
        if (!el) break;
        const dx = cmd.to[0] - (el.x ?? 0);
        const dy = cmd.to[1] - (el.y ?? 0);
        this.detach(cmd.id, el.containerId);
        el.containerId = cmd.toContainerId;
        this.attach(cmd.id, cmd.toContainerId);
        el.x = cmd.to[0];
        el.y = cmd.to[1];
        this.shiftSubtree(el, dx, dy);
        if (cmd.version !== undefined) el.version = cmd.version;
        break;
      }
      case "ResizeNode": {
        const el = this.elements.get(cmd.id);
        if (!el) break;
        el.width = cmd.newSize[0];
        el.height = cmd.newSize[1];
        if (cmd.version !== undefined) el.version = cmd.version;
        break;
      }
      case "CreateEdge": {
        this.elements.set(cmd.id, {
          meta: "edge",
          id: cmd.id,
          typeName: cmd.typeName,
          sourceId: cmd.sourceId,
          targetId: cmd.targetId,
          bendPoints: structuredClone(cmd.bendPoints ?? []),
          attributes: structuredClone(cmd.initialAttributes ?? {}),
          version: cmd.version ?? 0,
        });
        break;
      }
      case "ReconnectEdge": {
        const el = this.elements.get(cmd.id);
        if (!el) break;
        el.sourceId = cmd.newSource;
        el.targetId = cmd.newTarget;
        if (cmd.version !== undefined) el.version = cmd.version;
        break;
      }
      case "BendEdge": {
        const el = this.elements.get(cmd.id);
        if (!el) break;
        el.bendPoints = structuredClone(cmd.newBendPoints);
        if (cmd.version !== undefined) el.version = cmd.version;
        break;
      }
      case "SetAttributes": {
        if (cmd.id === this.id) {
          this.attributes = structuredClone(cmd.newAssignment);
          break;
        }
        const el = this.elements.get(cmd.id);
        if (!el) break;
        el.attributes = structuredClone(cmd.newAssignment);
        if (cmd.version !== undefined) el.version = cmd.version;
        break;
      }
      case "Routing": {
        this.routing = { ...cmd.editorPreference };
        break;
      }
      case "RestoreElement":
        this.restore(cmd);
        break;
      case "Click":
      case "DoubleClick":
      case "ContextMenu":
        break; // interactions never mutate the replica
      default: {
        const exhaustive: never = cmd;
        throw new Error(`unhandled command ${(exhaustive as Command).type}`);
      }
    }
  }

  private shiftSubtree(el: ElementState, dx: number, dy: number): void {
    for (const childId of el.children ?? []) {
      const child = this.elements.get(childId);
      if (!child) continue;
      child.x = (child.x ?? 0) + dx;
      child.y = (child.y ?? 0) + dy;
      this.shiftSubtree(child, dx, dy);
    }
  }

  /** Write repair: adopt the authoritative state (or absence) wholesale. */
  restore(cmd: RestoreElement): void {
    if (cmd.id === this.id) {
      const state = cmd.state ?? {};
      if (state["attributes"]) {
        this.attributes = structuredClone(state["attributes"]) as Record<string, unknown[]>;
      }
      if (state["routing"]) {
        this.routing = structuredClone(state["routing"]) as Record<string, unknown>;
      }
      return;
    }
    const existing = this.elements.get(cmd.id);
    if (cmd.state === null) {
      if (existing) {
        this.detach(cmd.id, existing.containerId);
        this.elements.delete(cmd.id);
      }
      return;
    }
    const restored = structuredClone(cmd.state) as unknown as ElementState;
    if (existing && existing.containerId !== restored.containerId) {
      this.detach(cmd.id, existing.containerId);
    }
    this.elements.set(cmd.id, restored);
    if (restored.containerId !== undefined) {
      this.attach(cmd.id, restored.containerId);
    }
  }

  edgesOf(elementId: string): ElementState[] {
    const out: ElementState[] = [];
    for (const el of this.elements.values()) {
      if (el.meta === "edge" && (el.sourceId === elementId || el.targetId === elementId)) {
        out.push(el);
      }
    }
    return out;
  }
}

/** Concrete container type names from the /meta document. */
export function containerTypeNames(meta: Record<string, unknown>): string[] {
  const containers = (meta["containers"] ?? []) as { name: string; abstract?: boolean }[];
  return containers.filter((c) => !c.abstract).map((c) => c.name);
}
