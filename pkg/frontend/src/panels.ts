// Side panels: transformation list, property inspector, run panel, and
// history timeline.  Each render function is a pure projection of the
// session state plus the handlers it forwards user intent to.

import type { SessionState } from "./state.js";
import { movementDelta } from "./state.js";
import type { MatchInfo } from "./types.js";

export interface PanelHandlers {
    onHoverMatch(match: MatchInfo | null): void;
    onApplyMatch(match: MatchInfo, params: Record<string, unknown>): void;
    onUndo(): void;
    onCheckout(position: number): void;
    onRun(raw: string): void;
    onEditAttribute(state: string, id: number, attribute: string,
                    value: unknown): void;
    onLoadFixture(name: string): void;
}

function h<K extends keyof HTMLElementTagNameMap>(
        tag: K, cls?: string, text?: string): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (cls) node.className = cls;
    if (text !== undefined) node.textContent = text;
    return node;
}

export function renderGalleryPicker(container: HTMLElement, fixtures: string[],
                                    handlers: PanelHandlers): void {
    container.textContent = "";
    container.appendChild(h("h2", undefined, "Gallery"));
    const select = h("select");
    select.appendChild(h("option", undefined, "pick a program…"));
    for (const name of fixtures) {
        const option = h("option", undefined, name);
        option.value = name;
        select.appendChild(option);
    }
    select.addEventListener("change", () => {
        if (select.value) handlers.onLoadFixture(select.value);
    });
    container.appendChild(select);
}

export function renderMatches(container: HTMLElement, session: SessionState,
                              handlers: PanelHandlers): void {
    container.textContent = "";
    container.appendChild(h("h2", undefined,
                            `Transformations (${session.matches.length})`));
    const list = h("ul", "match-list");
    for (const match of session.matches) {
        const item = h("li", "match-item");
        if (session.selectedMatch === match.id) item.classList.add("selected");
        const head = h("div", "match-name", match.transformation);
        const where = h("div", "match-where",
                        `${match.state ?? "states"} · ` +
                        Object.entries(match.anchors)
                            .map(([k, v]) => `${k}→${v}`).join(", "));
        item.appendChild(head);
        item.appendChild(where);
        if (match.description) {
            item.appendChild(h("div", "match-desc", match.description));
        }
        const paramInputs = new Map<string, HTMLInputElement>();
        if (Object.keys(match.params).length) {
            const form = h("div", "match-params");
            for (const [key, fallback] of Object.entries(match.params)) {
                const label = h("label", undefined, `${key} `);
                const input = h("input");
                input.value = String(fallback ?? "");
                input.size = 6;
                paramInputs.set(key, input);
                label.appendChild(input);
                form.appendChild(label);
            }
            item.appendChild(form);
        }
        const apply = h("button", "apply-btn", "Apply");
        apply.addEventListener("click", (event) => {
            event.stopPropagation();
            const params: Record<string, unknown> = {};
            for (const [key, input] of paramInputs) {
                if (input.value === "") continue;
                const asInt = Number.parseInt(input.value, 10);
                params[key] = Number.isNaN(asInt) || String(asInt) !== input.value
                    ? input.value : asInt;
            }
            handlers.onApplyMatch(match, params);
        });
        item.appendChild(apply);
        item.addEventListener("mouseenter", () => handlers.onHoverMatch(match));
        item.addEventListener("mouseleave", () => handlers.onHoverMatch(null));
        list.appendChild(item);
    }
    if (!session.matches.length) {
        list.appendChild(h("li", "placeholder", "no applicable matches"));
    }
    container.appendChild(list);
}

export function renderInspector(container: HTMLElement, session: SessionState,
                                handlers: PanelHandlers): void {
    container.textContent = "";
    container.appendChild(h("h2", undefined, "Inspector"));
    const pick = session.selectedNode;
    const view = session.graph;
    if (!pick || !view) {
        container.appendChild(h("p", "placeholder", "select a node"));
        return;
    }
    const state = view.states.find((s) => s.name === pick.state);
    const node = state?.nodes.find((n) => n.id === pick.id);
    if (!state || !node) {
        container.appendChild(h("p", "placeholder", "selection is gone"));
        return;
    }
    container.appendChild(h("p", "inspect-head",
                            `${node.kind} #${node.id} in ${state.name}`));
    container.appendChild(h("p", "inspect-label", node.label));

    const editable: { attribute: string; value: string }[] = [];
    if (node.kind === "MapEntry") {
        const inside = node.label.replace(/^\[|\]$/g, "");
        const ranges = inside.split(", ").map((part) =>
            part.includes("=") ? part.slice(part.indexOf("=") + 1) : part);
        editable.push({ attribute: "ranges", value: ranges.join(", ") });
        editable.push({ attribute: "schedule", value: "" });
    } else if (node.kind === "ConsumeEntry") {
        editable.push({ attribute: "condition", value: "" });
    } else if (node.kind === "AccessNode") {
        editable.push({ attribute: "data", value: node.label });
    }
    for (const field of editable) {
        const row = h("div", "inspect-row");
        row.appendChild(h("span", "attr-name", field.attribute));
        const input = h("input");
        input.value = field.value;
        row.appendChild(input);
        const save = h("button", undefined, "Set");
        save.addEventListener("click", () => {
            const value = field.attribute === "ranges"
                ? input.value.split(",").map((r) => r.trim())
                : input.value;
            handlers.onEditAttribute(state.name, node.id, field.attribute,
                                     value);
        });
        row.appendChild(save);
        container.appendChild(row);
    }
    if (!editable.length) {
        container.appendChild(h("p", "placeholder",
                                "no editable attributes for this node"));
    }
}

export function renderRunPanel(container: HTMLElement, session: SessionState,
                               handlers: PanelHandlers): void {
    container.textContent = "";
    container.appendChild(h("h2", undefined, "Run"));
    const area = h("textarea", "run-input");
    area.rows = 6;
    area.placeholder = '{"arrays": {"A": [[1,0],[0,1]], …}, "symbols": {"M": 2}}';
    area.value = (container.dataset.lastInput as string) ?? "";
    area.addEventListener("input", () => {
        container.dataset.lastInput = area.value;
    });
    container.appendChild(area);
    const run = h("button", "run-btn", "Run on current graph");
    run.addEventListener("click", () => handlers.onRun(area.value));
    container.appendChild(run);

    const report = session.lastReport;
    if (!report) return;
    container.appendChild(h("h3", undefined,
                            `moved ${report.total_moved} elements · ` +
                            `${report.tasklet_invocations} tasklet firings`));
    const outputs = h("pre", "run-outputs");
    outputs.textContent = JSON.stringify(report.outputs, null, 1);
    container.appendChild(outputs);

    const delta = movementDelta(session);
    if (session.previousReport) {
        const equal = JSON.stringify(session.previousReport.outputs)
            === JSON.stringify(report.outputs);
        container.appendChild(h(
            "p", equal ? "outputs-equal" : "outputs-differ",
            equal ? "outputs equal to the previous run"
                  : "outputs differ from the previous run"));
        const heading = delta.size
            ? `${delta.size} memlet counters changed`
            : "memlet counters unchanged";
        container.appendChild(h("h3", undefined, heading));
        const list = h("ul", "counter-list");
        for (const [key, [before, now]] of [...delta].slice(0, 12)) {
            list.appendChild(h("li", "counter-item",
                               `${key}: ${before} → ${now}`));
        }
        container.appendChild(list);
    }
}

export function renderHistory(container: HTMLElement, session: SessionState,
                              handlers: PanelHandlers): void {
    container.textContent = "";
    container.appendChild(h("h2", undefined, "History"));
    const undo = h("button", "undo-btn", "Undo");
    undo.disabled = session.historyCurrent <= 0;
    undo.addEventListener("click", () => handlers.onUndo());
    container.appendChild(undo);
    const list = h("ol", "history-list");
    session.history.forEach((entry, i) => {
        const item = h("li", "history-item");
        if (entry.current) item.classList.add("current");
        const name = entry.transformation ?? (i === 0 ? "initial" : "edit");
        item.appendChild(h("span", "history-name", name));
        item.appendChild(h("code", "history-hash", entry.hash.slice(0, 8)));
        if (i > 0) {
            const prev = session.history[i - 1];
            const diff = entry.nodes - prev.nodes;
            const badge = h("span", "diff-badge",
                            diff === 0 ? "±0" : diff > 0 ? `+${diff}` : `${diff}`);
            badge.classList.add(diff > 0 ? "grew" : diff < 0 ? "shrank" : "same");
            item.appendChild(badge);
        }
        item.addEventListener("click", () => handlers.onCheckout(entry.position));
        list.appendChild(item);
    });
    container.appendChild(list);
}

export function renderStatus(container: HTMLElement,
                             session: SessionState): void {
    container.textContent = "";
    if (session.conflict) {
        container.appendChild(h("div", "banner conflict",
                                `conflict: ${session.conflict} — the view was `
                                + "refreshed; retry your action"));
    } else if (session.error) {
        container.appendChild(h("div", "banner error", session.error));
    }
    const meta = h("div", "session-meta",
                   session.graph
                       ? `${session.graph.name} · v${session.version} · ` +
                         session.hash.slice(0, 10)
                       : "no graph");
    container.appendChild(meta);
}
