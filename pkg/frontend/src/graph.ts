// Force-layout renderer for the graph environment. Positions are kept
// between frames so the layout stays stable as more of the graph appears;
// node shading distinguishes visible, fringe, and unknown nodes.

import { PogsPayload } from "./protocol.js";

interface LayoutNode {
  x: number;
  y: number;
  vx: number;
  vy: number;
}

const NODE_COLORS: Record<string, string> = {
  current: "#f5e642",
  visible: "#68b36b",
  fringe: "#b9975b",
  unknown: "#3a3a46",
};

export class GraphView {
  private positions = new Map<number, LayoutNode>();

  layout(payload: PogsPayload, width: number, height: number,
         iterations = 30): Map<number, LayoutNode> {
    for (const node of payload.nodes) {
      if (!this.positions.has(node.id)) {
        const angle = (node.id * 2.399963) % (Math.PI * 2); // golden angle
        this.positions.set(node.id, {
          x: width / 2 + Math.cos(angle) * width * 0.3,
          y: height / 2 + Math.sin(angle) * height * 0.3,
          vx: 0,
          vy: 0,
        });
      }
    }
    const nodes = payload.nodes.map((n) => this.positions.get(n.id)!);
    const ideal = Math.min(width, height) /
      Math.max(3, Math.sqrt(payload.nodes.length) * 1.8);

    for (let it = 0; it < iterations; it++) {
      for (let i = 0; i < nodes.length; i++) {
        for (let j = i + 1; j < nodes.length; j++) {
          const a = nodes[i], b = nodes[j];
          let dx = a.x - b.x, dy = a.y - b.y;
          let d2 = dx * dx + dy * dy;
          if (d2 < 1e-4) { dx = Math.random() - 0.5; dy = Math.random() - 0.5; d2 = 1; }
          const rep = (ideal * ideal) / d2 * 0.5;
          a.vx += dx * rep * 0.01; a.vy += dy * rep * 0.01;
          b.vx -= dx * rep * 0.01; b.vy -= dy * rep * 0.01;
        }
      }
      for (const [u, v] of payload.edges) {
        const a = this.positions.get(u), b = this.positions.get(v);
        if (!a || !b) continue;
        const dx = b.x - a.x, dy = b.y - a.y;
        const dist = Math.sqrt(dx * dx + dy * dy) || 1;
        const pull = (dist - ideal) / dist * 0.05;
        a.vx += dx * pull; a.vy += dy * pull;
        b.vx -= dx * pull; b.vy -= dy * pull;
      }
      for (const n of nodes) {
        n.x = Math.max(14, Math.min(width - 14, n.x + n.vx));
        n.y = Math.max(14, Math.min(height - 14, n.y + n.vy));
        n.vx *= 0.6;
        n.vy *= 0.6;
      }
    }
    return this.positions;
  }

  render(canvas: HTMLCanvasElement, payload: PogsPayload): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const pos = this.layout(payload, canvas.width, canvas.height);
    ctx.fillStyle = "#15151c";
    ctx.fillRect(0, 0, canvas.width, canvas.height);

    ctx.strokeStyle = "#56566a";
    ctx.lineWidth = 1.5;
    for (const [u, v] of payload.edges) {
      const a = pos.get(u), b = pos.get(v);
      if (!a || !b) continue;
      ctx.beginPath();
      ctx.moveTo(a.x, a.y);
      ctx.lineTo(b.x, b.y);
      ctx.stroke();
    }

    for (const node of payload.nodes) {
      const p = pos.get(node.id)!;
      ctx.fillStyle = NODE_COLORS[node.state];
      ctx.beginPath();
      ctx.arc(p.x, p.y, node.id === payload.target ? 12 : 9, 0, Math.PI * 2);
      ctx.fill();
      if (node.id === payload.target) {
        ctx.strokeStyle = "#e05555";
        ctx.lineWidth = 3;
        ctx.stroke();
      }
      ctx.fillStyle = "#e8e8f0";
      ctx.font = "10px monospace";
      ctx.textAlign = "center";
      ctx.fillText(String(node.id), p.x, p.y + 3.5);
    }
  }
}
