// Wiring: one store, async actions against the service, full re-render on
// every state change.  Mutations wait for the server; a 409 surfaces as a
// conflict banner and a refresh, never a silent retry.

import { ApiClient, ConflictError } from "./api.js";
import {
    SessionState,
    initialState,
    selectMatch,
    selectNode,
    toggleCollapse,
    withConflict,
    withError,
    withGraph,
    withHistory,
    withMatches,
    withReport,
} from "./state.js";
import { renderGraph } from "./render.js";
import {
    renderGalleryPicker,
    renderHistory,
    renderInspector,
    renderMatches,
    renderRunPanel,
    renderStatus,
} from "./panels.js";
import type { MatchInfo } from "./types.js";

const api = new ApiClient("");

let session: SessionState = initialState();
let fixtures: string[] = [];

function setState(next: SessionState): void {
    session = next;
    redraw();
}

async function refresh(): Promise<void> {
    try {
        const graph = await api.graph();
        let next = withGraph(session, graph);
        const matches = await api.matches();
        next = withMatches(next, matches.matches, matches.version);
        const history = await api.history();
        next = withHistory(next, history.history, history.current);
        setState(next);
    } catch (err) {
        setState(withError(session, String(err)));
    }
}

async function mutate(action: () => Promise<unknown>): Promise<void> {
    try {
        await action();
        await refresh();
    } catch (err) {
        if (err instanceof ConflictError) {
            await refresh();
            setState(withConflict(session, err.message));
        } else {
            setState(withError(session, String(err)));
        }
    }
}

const panelHandlers = {
    onHoverMatch(match: MatchInfo | null) {
        setState(selectMatch(session, match));
    },
    onApplyMatch(match: MatchInfo, params: Record<string, unknown>) {
        void mutate(() => api.apply(match.id, params, session.version));
    },
    onUndo() {
        void mutate(() => api.undo(session.version));
    },
    onCheckout(position: number) {
        // the service walks history strictly backwards; forward checkout
        // means re-applying from the journal, which stays user-driven
        const steps = session.historyCurrent - position;
        if (steps <= 0) return;
        void mutate(async () => {
            for (let i = 0; i < steps; i++) {
                const at = await api.history();
                await api.undo(at.version);
            }
        });
    },
    onRun(raw: string) {
        let parsed: { arrays?: Record<string, unknown>;
                      symbols?: Record<string, number> };
        try {
            parsed = JSON.parse(raw || "{}");
        } catch (err) {
            setState(withError(session, `input is not valid JSON: ${err}`));
            return;
        }
        void (async () => {
            try {
                const { report } = await api.run(parsed.arrays ?? {},
                                                 parsed.symbols ?? {});
                setState(withReport(session, report));
            } catch (err) {
                setState(withError(session, String(err)));
            }
        })();
    },
    onEditAttribute(state: string, id: number, attribute: string,
                    value: unknown) {
        void mutate(() => api.editNode({ state, id, attribute, value,
                                         version: session.version }));
    },
    onLoadFixture(name: string) {
        void mutate(async () => {
            const doc = await api.galleryDocument(name);
            await api.loadGraph(doc);
        });
    },
};

const canvasHandlers = {
    onNodeClick(stateName: string, nodeId: number) {
        setState(selectNode(session, { state: stateName, id: nodeId }));
    },
    onScopeToggle(stateName: string, entryId: number) {
        setState(toggleCollapse(session, stateName, entryId));
    },
};

function byId(id: string): HTMLElement {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
}

function redraw(): void {
    renderStatus(byId("status"), session);
    renderGalleryPicker(byId("gallery"), fixtures, panelHandlers);
    renderMatches(byId("matches"), session, panelHandlers);
    renderGraph(byId("canvas"), session, canvasHandlers);
    renderInspector(byId("inspector"), session, panelHandlers);
    renderRunPanel(byId("run-panel"), session, panelHandlers);
    renderHistory(byId("history"), session, panelHandlers);
}

async function boot(): Promise<void> {
    try {
        fixtures = (await api.gallery()).fixtures;
    } catch {
        fixtures = [];
    }
    await refresh();
}

void boot();
