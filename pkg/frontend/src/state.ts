// Session state and its pure reducers.  Panels are pure functions of this
// value plus the handlers they are given, so every update flows through
// setState and re-render; mutations never render optimistically.

import type {
    GraphResponse,
    HistoryEntry,
    MatchInfo,
    RunReport,
} from "./types.js";

export interface SessionState {
    version: number;
    hash: string;
    graph: GraphResponse["view"] | null;
    matches: MatchInfo[];
    selectedMatch: string | null;
    highlight: Set<number>;
    selectedNode: { state: string; id: number } | null;
    history: HistoryEntry[];
    historyCurrent: number;
    lastReport: RunReport | null;
    previousReport: RunReport | null;
    collapsed: Map<string, Set<number>>;
    conflict: string | null;
    error: string | null;
}

export function initialState(): SessionState {
    return {
        version: 0,
        hash: "",
        graph: null,
        matches: [],
        selectedMatch: null,
        highlight: new Set(),
        selectedNode: null,
        history: [],
        historyCurrent: -1,
        lastReport: null,
        previousReport: null,
        collapsed: new Map(),
        conflict: null,
        error: null,
    };
}

export function withGraph(s: SessionState, resp: GraphResponse): SessionState {
    // collapse choices are session-local; keep them only where the node
    // still exists and is still a scope entry
    const collapsed = new Map<string, Set<number>>();
    for (const state of resp.view.states) {
        const prior = s.collapsed.get(state.name);
        if (!prior) continue;
        const entries = new Set(
            state.nodes.filter((n) => n.kind.endsWith("Entry")).map((n) => n.id));
        const keep = new Set([...prior].filter((id) => entries.has(id)));
        if (keep.size) collapsed.set(state.name, keep);
    }
    return {
        ...s,
        version: resp.version,
        hash: resp.hash,
        graph: resp.view,
        collapsed,
        selectedNode: null,
        conflict: null,
        error: null,
    };
}

export function withMatches(s: SessionState, matches: MatchInfo[],
                            version: number): SessionState {
    const stillThere = matches.some((m) => m.id === s.selectedMatch);
    return {
        ...s,
        matches,
        version,
        selectedMatch: stillThere ? s.selectedMatch : null,
        highlight: stillThere ? s.highlight : new Set(),
    };
}

export function withHistory(s: SessionState, history: HistoryEntry[],
                            current: number): SessionState {
    return { ...s, history, historyCurrent: current };
}

export function withReport(s: SessionState, report: RunReport): SessionState {
    return {
        ...s,
        previousReport: s.lastReport,
        lastReport: report,
        error: null,
    };
}

export function selectMatch(s: SessionState, match: MatchInfo | null,
                            ): SessionState {
    return {
        ...s,
        selectedMatch: match ? match.id : null,
        highlight: new Set(match ? Object.values(match.anchors) : []),
    };
}

export function selectNode(s: SessionState,
                           pick: { state: string; id: number } | null,
                           ): SessionState {
    return { ...s, selectedNode: pick };
}

export function toggleCollapse(s: SessionState, stateName: string,
                               entryId: number): SessionState {
    const collapsed = new Map(s.collapsed);
    const set = new Set(collapsed.get(stateName) ?? []);
    if (set.has(entryId)) {
        set.delete(entryId);
    } else {
        set.add(entryId);
    }
    collapsed.set(stateName, set);
    return { ...s, collapsed };
}

export function withConflict(s: SessionState, message: string): SessionState {
    // a stale-version action surfaces as a conflict; it is never retried
    // silently — the user refreshes and decides
    return { ...s, conflict: message };
}

export function withError(s: SessionState, message: string | null,
                          ): SessionState {
    return { ...s, error: message };
}

export function movementDelta(s: SessionState): Map<string, [number, number]> {
    // per-memlet counters of the last two runs, keyed by memlet, where they
    // differ; the run panel shows these as the effect of a transformation
    const out = new Map<string, [number, number]>();
    if (!s.lastReport || !s.previousReport) return out;
    const keys = new Set([
        ...Object.keys(s.lastReport.elements_moved),
        ...Object.keys(s.previousReport.elements_moved),
    ]);
    for (const key of keys) {
        const now = s.lastReport.elements_moved[key] ?? 0;
        const before = s.previousReport.elements_moved[key] ?? 0;
        if (now !== before) out.set(key, [before, now]);
    }
    return out;
}
