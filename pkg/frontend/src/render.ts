// SVG rendering of the graph view: one rounded container per state, nodes
// drawn with kind-specific glyphs (octagon tasklets, trapezoid scope
// nodes, dashed streams, double octagon invokes, inverted-triangle
// reductions), memlet labels on edges, transition arrows between states.

import type { StateLayout, PlacedNode } from "./layout.js";
import { layoutState } from "./layout.js";
import type { GraphView, StateView } from "./types.js";
import type { SessionState } from "./state.js";

const SVG = "http://www.w3.org/2000/svg";

export interface CanvasHandlers {
    onNodeClick(stateName: string, nodeId: number): void;
    onScopeToggle(stateName: string, entryId: number): void;
}

function el<K extends keyof SVGElementTagNameMap>(
        tag: K, attrs: Record<string, string | number> = {},
        ): SVGElementTagNameMap[K] {
    const node = document.createElementNS(SVG, tag);
    for (const [key, value] of Object.entries(attrs)) {
        node.setAttribute(key, String(value));
    }
    return node;
}

function glyph(node: PlacedNode, streams: Set<string>): SVGElement {
    const { x, y, width: w, height: h } = node;
    const cls = `node-shape kind-${node.kind}`;
    switch (node.kind) {
        case "Tasklet": {
            const c = Math.min(10, w / 4);
            const pts = [
                [x + c, y], [x + w - c, y], [x + w, y + h / 3],
                [x + w, y + 2 * h / 3], [x + w - c, y + h],
                [x + c, y + h], [x, y + 2 * h / 3], [x, y + h / 3],
            ].map((p) => p.join(",")).join(" ");
            return el("polygon", { points: pts, class: cls });
        }
        case "MapEntry":
        case "ConsumeEntry": {
            const slope = 12;
            const pts = [
                [x + slope, y], [x + w - slope, y], [x + w, y + h], [x, y + h],
            ].map((p) => p.join(",")).join(" ");
            const poly = el("polygon", { points: pts, class: cls });
            if (node.kind === "ConsumeEntry") poly.classList.add("dashed");
            return poly;
        }
        case "MapExit":
        case "ConsumeExit": {
            const slope = 12;
            const pts = [
                [x, y], [x + w, y], [x + w - slope, y + h], [x + slope, y + h],
            ].map((p) => p.join(",")).join(" ");
            const poly = el("polygon", { points: pts, class: cls });
            if (node.kind === "ConsumeExit") poly.classList.add("dashed");
            return poly;
        }
        case "Reduce": {
            const pts = [[x, y], [x + w, y], [x + w / 2, y + h]]
                .map((p) => p.join(",")).join(" ");
            return el("polygon", { points: pts, class: cls });
        }
        case "NestedSdfg": {
            const group = el("g", { class: cls });
            group.appendChild(el("rect", { x, y, width: w, height: h, rx: 10 }));
            group.appendChild(el("rect", { x: x + 3, y: y + 3, width: w - 6,
                                           height: h - 6, rx: 8 }));
            return group;
        }
        default: {  // access node: ellipse, dashed when it names a stream
            const ellipse = el("ellipse", {
                cx: x + w / 2, cy: y + h / 2, rx: w / 2, ry: h / 2, class: cls,
            });
            if (streams.has(node.label)) ellipse.classList.add("dashed");
            return ellipse;
        }
    }
}

function renderState(view: StateView, layout: StateLayout,
                     session: SessionState,
                     handlers: CanvasHandlers): SVGGElement {
    const group = el("g", { class: "state-group" });
    group.appendChild(el("rect", {
        x: 0, y: 0, width: layout.width, height: layout.height + 24,
        rx: 8, class: "state-box",
    }));
    const title = el("text", { x: 8, y: 16, class: "state-title" });
    title.textContent = view.name;
    group.appendChild(title);

    const body = el("g", { transform: "translate(0, 24)" });
    group.appendChild(body);

    for (const cluster of layout.clusters) {
        body.appendChild(el("rect", {
            x: cluster.x, y: cluster.y, width: cluster.width,
            height: cluster.height, rx: 10,
            class: `scope-cluster depth-${cluster.depth % 4}`,
        }));
    }

    for (const edge of layout.edges) {
        const [a, b] = edge.points;
        body.appendChild(el("line", {
            x1: a[0], y1: a[1], x2: b[0], y2: b[1],
            class: "memlet" + (edge.label.includes("[CR:") ? " wcr" : ""),
            "marker-end": "url(#arrow)",
        }));
        if (edge.label !== "(empty)") {
            const lx = (a[0] + b[0]) / 2;
            const ly = (a[1] + b[1]) / 2 - 3;
            const text = el("text", { x: lx, y: ly, class: "memlet-label" });
            text.textContent = edge.label;
            body.appendChild(text);
        }
    }

    const streams = new Set(
        (session.graph?.containers ?? [])
            .filter((c) => c.kind === "stream").map((c) => c.name));
    for (const node of layout.nodes) {
        const g = el("g", { class: "node", "data-node": node.id });
        if (session.highlight.has(node.id)) g.classList.add("highlight");
        if (session.selectedNode?.state === view.name
                && session.selectedNode.id === node.id) {
            g.classList.add("selected");
        }
        const shape = glyph(node, streams);
        if (node.collapsedScope) shape.classList.add("collapsed");
        g.appendChild(shape);
        const label = el("text", {
            x: node.x + node.width / 2, y: node.y + node.height / 2 + 4,
            class: "node-label",
        });
        label.textContent = node.collapsedScope ? `${node.label} …` : node.label;
        g.appendChild(label);
        g.addEventListener("click", (event) => {
            event.stopPropagation();
            handlers.onNodeClick(view.name, node.id);
        });
        g.addEventListener("dblclick", (event) => {
            event.stopPropagation();
            if (node.kind.endsWith("Entry")) {
                handlers.onScopeToggle(view.name, node.id);
            }
        });
        body.appendChild(g);
    }
    return group;
}

export function renderGraph(container: HTMLElement, session: SessionState,
                            handlers: CanvasHandlers): void {
    container.textContent = "";
    const view = session.graph;
    if (!view) {
        const note = document.createElement("p");
        note.className = "placeholder";
        note.textContent = "No graph loaded — pick a gallery program.";
        container.appendChild(note);
        return;
    }
    const svg = el("svg", { class: "canvas-svg" });
    const defs = el("defs");
    const marker = el("marker", {
        id: "arrow", viewBox: "0 0 10 10", refX: 9, refY: 5,
        markerWidth: 7, markerHeight: 7, orient: "auto-start-reverse",
    });
    marker.appendChild(el("path", { d: "M 0 0 L 10 5 L 0 10 z",
                                    class: "arrow-head" }));
    defs.appendChild(marker);
    svg.appendChild(defs);

    let yOffset = 10;
    let total = 0;
    const positions = new Map<string, { x: number; y: number; w: number;
                                        h: number }>();
    for (const state of view.states) {
        const collapsed = session.collapsed.get(state.name) ?? new Set();
        const layout = layoutState(state, collapsed);
        const g = renderState(state, layout, session, handlers);
        g.setAttribute("transform", `translate(10, ${yOffset})`);
        svg.appendChild(g);
        positions.set(state.name, { x: 10, y: yOffset, w: layout.width,
                                    h: layout.height + 24 });
        yOffset += layout.height + 24 + 46;
        total = Math.max(total, layout.width + 20);
    }
    for (const t of view.transitions) {
        const a = positions.get(t.src);
        const b = positions.get(t.dst);
        if (!a || !b) continue;
        const down = b.y > a.y;
        const x1 = a.x + a.w / 2;
        const y1 = down ? a.y + a.h : a.y;
        const x2 = b.x + b.w / 2 + (down ? 0 : 24);
        const y2 = down ? b.y : b.y + b.h;
        svg.appendChild(el("line", {
            x1, y1, x2, y2, class: "transition",
            "marker-end": "url(#arrow)",
        }));
        const text = el("text", { x: (x1 + x2) / 2 + 6, y: (y1 + y2) / 2,
                                  class: "transition-label" });
        text.textContent = t.label;
        svg.appendChild(text);
    }
    svg.setAttribute("width", String(Math.max(total, 360)));
    svg.setAttribute("height", String(yOffset + 10));
    svg.setAttribute("viewBox", `0 0 ${Math.max(total, 360)} ${yOffset + 10}`);
    container.appendChild(svg);
}
