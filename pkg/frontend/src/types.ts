// Wire types mirroring the service's JSON payloads.

export interface ViewNode {
    id: number;
    kind: string;
    label: string;
    scope: number | null;
}

export interface ViewEdge {
    id: number;
    src: number;
    src_conn: string | null;
    dst: number;
    dst_conn: string | null;
    label: string;
}

export interface StateView {
    name: string;
    nodes: ViewNode[];
    edges: ViewEdge[];
    scope_exits: Record<string, number>;
}

export interface GraphView {
    name: string;
    states: StateView[];
    start_state: string | null;
    transitions: { src: string; dst: string; label: string }[];
    containers: { name: string; dims: string[]; basetype: string;
                  transient: boolean; kind: string }[];
    symbols: string[];
}

export interface GraphResponse {
    version: number;
    hash: string;
    view: GraphView;
    document: unknown;
}

export interface MatchInfo {
    id: string;
    index: number;
    transformation: string;
    state: string | null;
    anchors: Record<string, number>;
    digest: string;
    params: Record<string, unknown>;
    description: string;
}

export interface HistoryEntry {
    position: number;
    hash: string;
    transformation: string | null;
    nodes: number;
    current: boolean;
}

export interface RunReport {
    outputs: Record<string, unknown>;
    states_visited: string[];
    elements_moved: Record<string, number>;
    total_moved: number;
    tasklet_invocations: number;
}

export interface Diagnostic {
    severity: string;
    location: string;
    message: string;
}
