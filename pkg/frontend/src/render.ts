/**
 * View projection: replica + metamodel styles -> drawable shapes -> SVG.
 *
 * Pure functions of state, so the whole pipeline is unit-testable without
 * a DOM; the app layer just swaps the produced SVG into the page.
 */

import { ElementState, Replica } from "./model.js";

export interface Position {
  hAlign: "left" | "center" | "right";
  vAlign: "top" | "middle" | "bottom";
  dx: number;
  dy: number;
}

export interface Appearance {
  background?: string;
  foreground?: string;
  lineWidth?: number;
  lineStyle?: string;
}

export interface StyleShape {
  kind: string;
  width?: number;
  height?: number;
  value?: string;
  points?: [number, number][];
  position?: Position;
  appearance?: Appearance;
  innerShapes?: StyleShape[];
}

export interface EdgeStyle {
  appearance?: Appearance;
  decorators?: {
    location: number;
    arrowHead?: { width: number; length: number; filled: boolean };
    shape?: StyleShape;
  }[];
}

export interface Drawable {
  kind: string;
  x: number;
  y: number;
  width: number;
  height: number;
  points?: [number, number][];
  text?: string;
  appearance?: Appearance;
  children: Drawable[];
}

export interface EdgeView {
  elementId: string;
  typeName: string;
  path: [number, number][];
  decorators: { x: number; y: number; arrowHead?: unknown; shape?: Drawable }[];
  appearance?: Appearance;
}

export interface NodeView {
  elementId: string;
  typeName: string;
  shape: Drawable | null;
}

export interface ViewModel {
  nodes: NodeView[];
  edges: EdgeView[];
}

export function anchor(
  parentX: number,
  parentY: number,
  parentW: number,
  parentH: number,
  childW: number,
  childH: number,
  position: Position,
): [number, number] {
  let x: number;
  if (position.hAlign === "left") x = parentX;
  else if (position.hAlign === "right") x = parentX + parentW - childW;
  else x = parentX + (parentW - childW) / 2;
  let y: number;
  if (position.vAlign === "top") y = parentY;
  else if (position.vAlign === "bottom") y = parentY + parentH - childH;
  else y = parentY + (parentH - childH) / 2;
  return [x + position.dx, y + position.dy];
}

export function bindText(template: string, attributes: Record<string, unknown[]>): string {
  let out = template;
  for (const [name, values] of Object.entries(attributes)) {
    const value = values.length > 0 ? String(values[0]) : "";
    out = out.split("${" + name + "}").join(value);
  }
  return out;
}

export function resolveShape(
  shape: StyleShape,
  x: number,
  y: number,
  width: number,
  height: number,
  attributes: Record<string, unknown[]>,
): Drawable {
  let drawn: Drawable;
  if (shape.kind === "polyline") {
    drawn = {
      kind: "polyline",
      x,
      y,
      width,
      height,
      points: (shape.points ?? []).map(([px, py]) => [x + px, y + py] as [number, number]),
      appearance: shape.appearance,
      children: [],
    };
  } else if (shape.kind === "text") {
    drawn = {
      kind: "text",
      x,
      y,
      width: 0,
      height: 0,
      text: bindText(shape.value ?? "", attributes),
      appearance: shape.appearance,
      children: [],
    };
  } else {
    drawn = { kind: shape.kind, x, y, width, height, appearance: shape.appearance, children: [] };
  }
  for (const inner of shape.innerShapes ?? []) {
    const iw = inner.width ?? 0;
    const ih = inner.height ?? 0;
    const pos: Position = inner.position ?? { hAlign: "center", vAlign: "middle", dx: 0, dy: 0 };
    const [ix, iy] = anchor(drawn.x, drawn.y, width, height, iw, ih, pos);
    drawn.children.push(resolveShape(inner, ix, iy, iw, ih, attributes));
  }
  return drawn;
}

export function edgePath(replica: Replica, edge: ElementState): [number, number][] {
  const src = replica.elements.get(edge.sourceId ?? "");
  const tgt = replica.elements.get(edge.targetId ?? "");
  if (!src || !tgt) return [];
  const start: [number, number] = [
    (src.x ?? 0) + (src.width ?? 0) / 2,
    (src.y ?? 0) + (src.height ?? 0) / 2,
  ];
  const end: [number, number] = [
    (tgt.x ?? 0) + (tgt.width ?? 0) / 2,
    (tgt.y ?? 0) + (tgt.height ?? 0) / 2,
  ];
  return [start, ...(edge.bendPoints ?? []).map((p) => [...p] as [number, number]), end];
}

/** Point at a fraction of the polyline's total length. */
export function pointAlong(path: [number, number][], fraction: number): [number, number] {
  if (path.length === 0) return [0, 0];
  let total = 0;
  const segments: { a: [number, number]; b: [number, number]; length: number }[] = [];
  for (let i = 0; i + 1 < path.length; i++) {
    const a = path[i];
    const b = path[i + 1];
    const length = Math.hypot(b[0] - a[0], b[1] - a[1]);
    segments.push({ a, b, length });
    total += length;
  }
  if (total === 0) return [...path[0]];
  const target = Math.max(0, Math.min(1, fraction)) * total;
  let walked = 0;
  for (let i = 0; i < segments.length; i++) {
    const { a, b, length } = segments[i];
    if (walked + length >= target || i === segments.length - 1) {
      const t = length === 0 ? 0 : (target - walked) / length;
      return [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];
    }
    walked += length;
  }
  return [...path[path.length - 1]];
}

interface MetaStyles {
  nodes?: Record<string, { mainShape: StyleShape }>;
  edges?: Record<string, EdgeStyle>;
}

export function viewModel(replica: Replica, meta: Record<string, unknown>): ViewModel {
  const styles = (meta["styles"] ?? {}) as MetaStyles;
  const vm: ViewModel = { nodes: [], edges: [] };
  const ids = [...replica.elements.keys()].sort();
  for (const id of ids) {
    const el = replica.elements.get(id)!;
    if (el.meta === "edge") {
      const style = styles.edges?.[el.typeName];
      const path = edgePath(replica, el);
      const decorators: EdgeView["decorators"] = [];
      if (style && path.length >= 2) {
        for (const d of style.decorators ?? []) {
          const [px, py] = pointAlong(path, d.location);
          if (d.arrowHead) {
            decorators.push({ x: px, y: py, arrowHead: d.arrowHead });
          } else if (d.shape) {
            decorators.push({
              x: px,
              y: py,
              shape: resolveShape(d.shape, px, py, d.shape.width ?? 0, d.shape.height ?? 0,
                el.attributes),
            });
          }
        }
      }
      vm.edges.push({
        elementId: el.id,
        typeName: el.typeName,
        path,
        decorators,
        appearance: style?.appearance,
      });
    } else {
      const style = styles.nodes?.[el.typeName];
      vm.nodes.push({
        elementId: el.id,
        typeName: el.typeName,
        shape: style
          ? resolveShape(style.mainShape, el.x ?? 0, el.y ?? 0, el.width ?? 0, el.height ?? 0,
            el.attributes)
          : null,
      });
    }
  }
  return vm;
}

// ---------------------------------------------------------------------------
// SVG serialization
// ---------------------------------------------------------------------------

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function paint(appearance?: Appearance): string {
  const fill = appearance?.background ?? "none";
  const stroke = appearance?.foreground ?? "#000";
  const width = appearance?.lineWidth ?? 1;
  const dash = appearance?.lineStyle === "dashed" ? ' stroke-dasharray="6 3"' : "";
  return `fill="${esc(fill)}" stroke="${esc(stroke)}" stroke-width="${width}"${dash}`;
}

function drawableSvg(d: Drawable): string {
  let own: string;
  switch (d.kind) {
    case "rectangle":
      own = `<rect x="${d.x}" y="${d.y}" width="${d.width}" height="${d.height}" ${paint(d.appearance)}/>`;
      break;
    case "roundedRectangle":
      own = `<rect x="${d.x}" y="${d.y}" width="${d.width}" height="${d.height}" rx="6" ${paint(d.appearance)}/>`;
      break;
    case "ellipse":
      own = `<ellipse cx="${d.x + d.width / 2}" cy="${d.y + d.height / 2}" rx="${d.width / 2}" ry="${d.height / 2}" ${paint(d.appearance)}/>`;
      break;
    case "polyline":
      own = `<polyline points="${(d.points ?? []).map(([x, y]) => `${x},${y}`).join(" ")}" ${paint(d.appearance)}/>`;
      break;
    case "text":
      own = `<text x="${d.x}" y="${d.y}" text-anchor="middle" dominant-baseline="middle">${esc(d.text ?? "")}</text>`;
      break;
    default:
      own = "";
  }
  return own + d.children.map(drawableSvg).join("");
}

function arrowHeadSvg(x: number, y: number, path: [number, number][]): string {
  const prev = path.length >= 2 ? path[path.length - 2] : [x - 1, y];
  const angle = Math.atan2(y - prev[1], x - prev[0]);
  const size = 8;
  const a1 = angle + Math.PI - 0.4;
  const a2 = angle + Math.PI + 0.4;
  const p1 = [x + size * Math.cos(a1), y + size * Math.sin(a1)];
  const p2 = [x + size * Math.cos(a2), y + size * Math.sin(a2)];
  return `<polygon points="${x},${y} ${p1[0]},${p1[1]} ${p2[0]},${p2[1]}" fill="#424242"/>`;
}

export function toSvg(vm: ViewModel, width = 1200, height = 800): string {
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}">`,
  ];
  for (const edge of vm.edges) {
    const pts = edge.path.map(([x, y]) => `${x},${y}`).join(" ");
    parts.push(
      `<polyline data-id="${esc(edge.elementId)}" points="${pts}" fill="none" stroke="${esc(edge.appearance?.foreground ?? "#000")}" stroke-width="${edge.appearance?.lineWidth ?? 1}"/>`,
    );
    for (const d of edge.decorators) {
      if (d.arrowHead) parts.push(arrowHeadSvg(d.x, d.y, edge.path));
      if (d.shape) parts.push(drawableSvg(d.shape));
    }
  }
  for (const node of vm.nodes) {
    if (node.shape) {
      parts.push(`<g data-id="${esc(node.elementId)}">${drawableSvg(node.shape)}</g>`);
    }
  }
  parts.push("</svg>");
  return parts.join("");
}
