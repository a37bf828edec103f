/**
 * DOM rendering: the card grid, constraint chips, status banner, and a
 * lazy wireframe preview drawn from the downloaded OBJ.
 */

import { ShapeEntry } from "./api.js";
import { GalleryViewModel } from "./viewmodel.js";

export interface ParsedMesh {
  positions: Float32Array;
  indices: Uint32Array;
}

/** Minimal OBJ parser: vertices and fan-triangulated faces. */
export function parseObj(text: string): ParsedMesh {
  const positions: number[] = [];
  const indices: number[] = [];
  for (const raw of text.split("\n")) {
    const parts = raw.trim().split(/\s+/);
    if (parts[0] === "v") {
      positions.push(parseFloat(parts[1]), parseFloat(parts[2]), parseFloat(parts[3]));
    } else if (parts[0] === "f") {
      const idx = parts.slice(1).map((tok) => parseInt(tok.split("/")[0], 10) - 1);
      for (let k = 1; k < idx.length - 1; k++) {
        indices.push(idx[0], idx[k], idx[k + 1]);
      }
    }
  }
  return { positions: new Float32Array(positions), indices: new Uint32Array(indices) };
}

/** Orthographic wireframe of a mesh onto a 2D canvas (z up, slight tilt). */
export function drawWireframe(canvas: HTMLCanvasElement, mesh: ParsedMesh): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return; // headless test environments have no 2d context
  const { positions, indices } = mesh;
  const n = positions.length / 3;
  if (n === 0) return;

  // View: rotate 30 degrees around z, then tilt 60 degrees toward the camera.
  const ca = Math.cos(Math.PI / 6), sa = Math.sin(Math.PI / 6);
  const ct = Math.cos(Math.PI / 3), st = Math.sin(Math.PI / 3);
  const pts: [number, number][] = [];
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (let i = 0; i < n; i++) {
    const x = positions[3 * i], y = positions[3 * i + 1], z = positions[3 * i + 2];
    const rx = ca * x - sa * y;
    const ry = sa * x + ca * y;
    const u = rx;
    const v = ct * ry + st * z;
    pts.push([u, v]);
    minX = Math.min(minX, u); maxX = Math.max(maxX, u);
    minY = Math.min(minY, v); maxY = Math.max(maxY, v);
  }
  const span = Math.max(maxX - minX, maxY - minY, 1e-9);
  const pad = 8;
  const scale = (Math.min(canvas.width, canvas.height) - 2 * pad) / span;
  const px = (p: [number, number]): [number, number] => [
    pad + (p[0] - minX) * scale,
    canvas.height - pad - (p[1] - minY) * scale,
  ];

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#8ecae6";
  ctx.lineWidth = 0.6;
  ctx.beginPath();
  for (let t = 0; t < indices.length; t += 3) {
    const a = px(pts[indices[t]]);
    const b = px(pts[indices[t + 1]]);
    const c = px(pts[indices[t + 2]]);
    ctx.moveTo(a[0], a[1]); ctx.lineTo(b[0], b[1]);
    ctx.lineTo(c[0], c[1]); ctx.lineTo(a[0], a[1]);
  }
  ctx.stroke();
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function scoreBadge(entry: ShapeEntry): HTMLElement {
  const badge = el("span", "badge score",
    entry.score === null ? "—" : entry.score.toFixed(3));
  badge.title = "functional plausibility";
  return badge;
}

function renderCard(vm: GalleryViewModel, entry: ShapeEntry, selected: boolean): HTMLElement {
  const card = el("div", selected ? "card selected" : "card");
  card.dataset.shapeId = entry.id;

  const thumb = el("img", "thumb") as HTMLImageElement;
  thumb.src = vm.api.thumbUrl(entry.thumb_ref);
  thumb.alt = entry.id;
  card.appendChild(thumb);

  const title = el("div", "title", entry.id);
  card.appendChild(title);

  const badges = el("div", "badges");
  badges.appendChild(scoreBadge(entry));
  if (entry.multi_functionality !== null) {
    badges.appendChild(el("span", "badge multi", `×${entry.multi_functionality}`));
  }
  card.appendChild(badges);

  const chips = el("div", "chips");
  for (const label of entry.labels) chips.appendChild(el("span", "chip label", label));
  if (entry.provenance) {
    for (const parent of entry.provenance.parents) {
      chips.appendChild(el("span", "chip parent", parent));
    }
    chips.appendChild(el("span", "chip op", entry.provenance.operation));
  }
  card.appendChild(chips);

  const preview = el("button", "preview-btn", "3D");
  preview.addEventListener("click", async (ev) => {
    ev.stopPropagation();
    let canvas = card.querySelector("canvas");
    if (canvas) { canvas.remove(); return; }
    canvas = el("canvas", "preview") as HTMLCanvasElement;
    canvas.width = 220;
    canvas.height = 180;
    card.appendChild(canvas);
    const text = await vm.api.fetchMeshText(entry.mesh_ref);
    drawWireframe(canvas as HTMLCanvasElement, parseObj(text));
  });
  card.appendChild(preview);

  card.addEventListener("click", () => vm.toggleCard(entry.id));
  return card;
}

export function renderGallery(root: HTMLElement, vm: GalleryViewModel): void {
  root.textContent = "";

  const banner = el("div", "banner", vm.statusBanner);
  if (vm.errorBanner) {
    banner.className = "banner error";
    banner.textContent = vm.errorBanner;
  }
  root.appendChild(banner);

  const constraints = el("div", "constraints");
  constraints.appendChild(el("span", "constraints-title", "Required labels:"));
  for (const label of vm.knownLabels) {
    const chip = el("button",
      vm.activeLabels.has(label) ? "chip constraint active" : "chip constraint",
      label);
    chip.dataset.label = label;
    chip.addEventListener("click", () =>
      vm.setConstraint(label, !vm.activeLabels.has(label)));
    constraints.appendChild(chip);
  }
  root.appendChild(constraints);

  const grid = el("div", "grid");
  for (const card of vm.cards) {
    grid.appendChild(renderCard(vm, card.entry, card.selected));
  }
  root.appendChild(grid);

  const bar = el("div", "actions");
  const advance = el("button", "advance", "Advance generation") as HTMLButtonElement;
  advance.disabled = !vm.canAdvance;
  advance.addEventListener("click", () => void vm.advance());
  bar.appendChild(advance);
  bar.appendChild(el("span", "gen-indicator", `G${vm.generationIndex}`));
  root.appendChild(bar);
}
