// Layered DAG auto-layout with scope nesting drawn as clusters.
//
// Layer assignment is longest-path over the dataflow edges; within a layer
// nodes are ordered by a few barycenter sweeps.  Collapsing a scope hides
// exactly the nodes strictly inside it plus its exit; edges touching
// hidden nodes re-anchor at the collapsed entry.

import type { StateView, ViewEdge, ViewNode } from "./types.js";

export interface PlacedNode {
    id: number;
    kind: string;
    label: string;
    x: number;
    y: number;
    width: number;
    height: number;
    collapsedScope: boolean;
}

export interface RoutedEdge {
    id: number;
    src: number;
    dst: number;
    label: string;
    points: [number, number][];
}

export interface Cluster {
    entry: number;
    x: number;
    y: number;
    width: number;
    height: number;
    depth: number;
}

export interface StateLayout {
    nodes: PlacedNode[];
    edges: RoutedEdge[];
    clusters: Cluster[];
    width: number;
    height: number;
}

const NODE_H = 34;
const GAP_X = 28;
const GAP_Y = 34;
const PAD = 18;

export function nodeWidth(label: string): number {
    return Math.max(70, 22 + label.length * 7.5);
}

/** All nodes strictly inside a scope entry (transitively), plus the exits
 * of every hidden scope. */
export function scopeSubtree(state: StateView, entry: number): Set<number> {
    const children = new Map<number, number[]>();
    for (const n of state.nodes) {
        if (n.scope !== null) {
            const list = children.get(n.scope) ?? [];
            list.push(n.id);
            children.set(n.scope, list);
        }
    }
    const hidden = new Set<number>();
    const stack = [entry];
    while (stack.length) {
        const cur = stack.pop()!;
        for (const child of children.get(cur) ?? []) {
            if (!hidden.has(child)) {
                hidden.add(child);
                stack.push(child);
            }
        }
        const exit = state.scope_exits[String(cur)];
        if (exit !== undefined && cur !== entry) {
            hidden.add(exit);
        }
    }
    const ownExit = state.scope_exits[String(entry)];
    if (ownExit !== undefined) hidden.add(ownExit);
    return hidden;
}

export interface VisibleGraph {
    nodes: ViewNode[];
    edges: ViewEdge[];
    anchor: Map<number, number>; // original node -> visible stand-in
    collapsedEntries: Set<number>;
}

export function visibleGraph(state: StateView,
                             collapsed: Set<number>): VisibleGraph {
    const hidden = new Set<number>();
    const anchor = new Map<number, number>();
    const scopeOf = new Map(state.nodes.map((n) => [n.id, n.scope]));
    const depth = (id: number): number => {
        let d = 0;
        let cur = scopeOf.get(id);
        while (cur !== null && cur !== undefined) {
            d += 1;
            cur = scopeOf.get(cur);
        }
        return d;
    };
    // outermost first, so a collapse inside an already-hidden scope defers
    // to the visible outer anchor
    const active = [...collapsed]
        .filter((id) => state.nodes.some((n) => n.id === id))
        .sort((a, b) => depth(a) - depth(b));
    for (const entry of active) {
        if (hidden.has(entry)) continue;
        for (const node of scopeSubtree(state, entry)) {
            if (!hidden.has(node)) {
                hidden.add(node);
                anchor.set(node, entry);
            }
        }
    }
    const nodes = state.nodes.filter((n) => !hidden.has(n.id));
    const edges: ViewEdge[] = [];
    const seen = new Set<string>();
    for (const e of state.edges) {
        const src = hidden.has(e.src) ? anchor.get(e.src)! : e.src;
        const dst = hidden.has(e.dst) ? anchor.get(e.dst)! : e.dst;
        if (src === dst) continue; // interior edge of a collapsed scope
        const key = `${src}->${dst}`;
        if (seen.has(key)) continue;
        seen.add(key);
        edges.push({ ...e, src, dst });
    }
    return { nodes, edges, anchor,
             collapsedEntries: new Set(active.filter((id) => !hidden.has(id))) };
}

export function layerAssignment(nodes: ViewNode[],
                                edges: ViewEdge[]): Map<number, number> {
    const ids = nodes.map((n) => n.id);
    const present = new Set(ids);
    const preds = new Map<number, number[]>();
    for (const e of edges) {
        if (!present.has(e.src) || !present.has(e.dst)) continue;
        const list = preds.get(e.dst) ?? [];
        list.push(e.src);
        preds.set(e.dst, list);
    }
    const layer = new Map<number, number>();
    const visiting = new Set<number>();
    const depth = (id: number): number => {
        const known = layer.get(id);
        if (known !== undefined) return known;
        if (visiting.has(id)) return 0; // defensive: cycles flatten
        visiting.add(id);
        let best = 0;
        for (const p of preds.get(id) ?? []) {
            best = Math.max(best, depth(p) + 1);
        }
        visiting.delete(id);
        layer.set(id, best);
        return best;
    };
    for (const id of ids) depth(id);
    return layer;
}

function orderRows(rows: number[][], edges: ViewEdge[],
                   layer: Map<number, number>): number[][] {
    const position = new Map<number, number>();
    const refresh = () => {
        rows.forEach((row) => row.forEach((id, i) => position.set(id, i)));
    };
    refresh();
    const neighbors = new Map<number, number[]>();
    const link = (a: number, b: number) => {
        const list = neighbors.get(a) ?? [];
        list.push(b);
        neighbors.set(a, list);
    };
    for (const e of edges) {
        if (!position.has(e.src) || !position.has(e.dst)) continue;
        link(e.dst, e.src);
        link(e.src, e.dst);
    }
    for (let sweep = 0; sweep < 4; sweep++) {
        for (const row of rows) {
            const score = (id: number) => {
                const ns = (neighbors.get(id) ?? [])
                    .filter((n) => layer.get(n) !== layer.get(id));
                if (!ns.length) return position.get(id)!;
                return ns.reduce((acc, n) => acc + position.get(n)!, 0) / ns.length;
            };
            row.sort((a, b) => score(a) - score(b) || a - b);
            refresh();
        }
    }
    return rows;
}

export function layoutState(state: StateView,
                            collapsed: Set<number>): StateLayout {
    const { nodes, edges, collapsedEntries } = visibleGraph(state, collapsed);
    const layer = layerAssignment(nodes, edges);
    const maxLayer = Math.max(0, ...layer.values());
    const rows: number[][] = Array.from({ length: maxLayer + 1 }, () => []);
    for (const n of nodes) rows[layer.get(n.id)!].push(n.id);
    rows.forEach((row) => row.sort((a, b) => a - b));
    orderRows(rows, edges, layer);

    const byId = new Map(nodes.map((n) => [n.id, n]));
    const placed = new Map<number, PlacedNode>();
    let width = 0;
    rows.forEach((row, li) => {
        let x = PAD;
        for (const id of row) {
            const node = byId.get(id)!;
            const w = nodeWidth(node.label);
            placed.set(id, {
                id,
                kind: node.kind,
                label: node.label,
                x,
                y: PAD + li * (NODE_H + GAP_Y),
                width: w,
                height: NODE_H,
                collapsedScope: collapsedEntries.has(id),
            });
            x += w + GAP_X;
        }
        width = Math.max(width, x);
    });
    // center each row
    rows.forEach((row) => {
        const rowWidth = row.length
            ? placed.get(row[row.length - 1])!.x
              + placed.get(row[row.length - 1])!.width
            : 0;
        const shift = (width - rowWidth) / 2;
        for (const id of row) placed.get(id)!.x += shift;
    });

    const routed: RoutedEdge[] = edges.map((e) => {
        const a = placed.get(e.src)!;
        const b = placed.get(e.dst)!;
        return {
            id: e.id,
            src: e.src,
            dst: e.dst,
            label: e.label,
            points: [
                [a.x + a.width / 2, a.y + a.height],
                [b.x + b.width / 2, b.y],
            ],
        };
    });

    const clusters: Cluster[] = [];
    const depths = new Map<number, number>();
    const scopeOf = new Map(state.nodes.map((n) => [n.id, n.scope]));
    const depthOf = (entry: number): number => {
        const known = depths.get(entry);
        if (known !== undefined) return known;
        const parent = scopeOf.get(entry);
        const d = parent === null || parent === undefined
            ? 0 : depthOf(parent) + 1;
        depths.set(entry, d);
        return d;
    };
    for (const n of state.nodes) {
        if (!n.kind.endsWith("Entry")) continue;
        if (!placed.has(n.id) || collapsedEntries.has(n.id)) continue;
        const members = [n.id, ...scopeSubtree(state, n.id)]
            .filter((id) => placed.has(id));
        const xs = members.map((id) => placed.get(id)!.x);
        const x2 = members.map((id) => placed.get(id)!.x + placed.get(id)!.width);
        const ys = members.map((id) => placed.get(id)!.y);
        const y2 = members.map((id) => placed.get(id)!.y + placed.get(id)!.height);
        const margin = 8;
        clusters.push({
            entry: n.id,
            x: Math.min(...xs) - margin,
            y: Math.min(...ys) - margin,
            width: Math.max(...x2) - Math.min(...xs) + 2 * margin,
            height: Math.max(...y2) - Math.min(...ys) + 2 * margin,
            depth: depthOf(n.id),
        });
    }
    clusters.sort((a, b) => a.depth - b.depth);

    const height = PAD * 2 + rows.length * NODE_H
        + Math.max(0, rows.length - 1) * GAP_Y;
    return { nodes: [...placed.values()], edges: routed, clusters,
             width: Math.max(width, 120), height: Math.max(height, 60) };
}
