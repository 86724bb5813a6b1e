// Canvas tile renderer for the gridworld: the operator sees exactly the
// agent's discovered map plus its current view.

import { CraftPayload } from "./protocol.js";

const TILE_COLORS: Record<string, string> = {
  grass: "#3a5f3a",
  tree: "#1d7a1d",
  stone: "#8a8a8a",
  iron: "#c77b30",
  diamond: "#4fd0e0",
  water: "#2d5fbf",
  table: "#a0682a",
  furnace: "#5a4a4a",
};

const FACING_OFFSETS: Record<string, [number, number]> = {
  north: [0, -1],
  south: [0, 1],
  east: [1, 0],
  west: [-1, 0],
};

export function renderGrid(canvas: HTMLCanvasElement, payload: CraftPayload): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const cell = Math.floor(Math.min(canvas.width / payload.width,
                                   canvas.height / payload.height));
  ctx.fillStyle = "#15151c"; // undiscovered
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  for (const [x, y, tile] of payload.known_tiles) {
    ctx.fillStyle = TILE_COLORS[tile] ?? "#444";
    ctx.fillRect(x * cell, y * cell, cell - 1, cell - 1);
  }

  if (payload.zombie) {
    const [zx, zy] = payload.zombie;
    ctx.fillStyle = "#c02020";
    ctx.beginPath();
    ctx.arc((zx + 0.5) * cell, (zy + 0.5) * cell, cell * 0.35, 0, Math.PI * 2);
    ctx.fill();
  }

  const [ax, ay] = payload.agent;
  ctx.fillStyle = "#f5e642";
  ctx.beginPath();
  ctx.arc((ax + 0.5) * cell, (ay + 0.5) * cell, cell * 0.38, 0, Math.PI * 2);
  ctx.fill();
  const [dx, dy] = FACING_OFFSETS[payload.facing] ?? [0, 1];
  ctx.strokeStyle = "#f5e642";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo((ax + 0.5) * cell, (ay + 0.5) * cell);
  ctx.lineTo((ax + 0.5 + dx * 0.6) * cell, (ay + 0.5 + dy * 0.6) * cell);
  ctx.stroke();
}
