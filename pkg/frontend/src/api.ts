// Thin typed client for the workbench service.  The UI never computes
// matches, validation, or execution results itself; everything comes from
// these endpoints.

import type {
    Diagnostic,
    GraphResponse,
    HistoryEntry,
    MatchInfo,
    RunReport,
} from "./types.js";

export class ConflictError extends Error {
    constructor(message: string, readonly payload: unknown) {
        super(message);
    }
}

export class ApiError extends Error {
    constructor(message: string, readonly status: number,
                readonly payload: unknown) {
        super(message);
    }
}

async function request<T>(base: string, path: string,
                          init?: RequestInit): Promise<T> {
    const response = await fetch(base + path, init);
    const body = await response.json().catch(() => ({}));
    if (response.status === 409) {
        throw new ConflictError(String((body as any).error ?? "conflict"), body);
    }
    if (!response.ok) {
        throw new ApiError(String((body as any).error ?? response.statusText),
                           response.status, body);
    }
    return body as T;
}

function post(payload: unknown): RequestInit {
    return {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
    };
}

export class ApiClient {
    constructor(readonly base: string = "") {}

    graph(): Promise<GraphResponse> {
        return request(this.base, "/api/graph");
    }

    matches(): Promise<{ version: number; matches: MatchInfo[] }> {
        return request(this.base, "/api/matches");
    }

    history(): Promise<{ version: number; history: HistoryEntry[];
                         current: number }> {
        return request(this.base, "/api/history");
    }

    journal(): Promise<{ entries: unknown[]; final_hash: string;
                         initial_hash: string; replayable: boolean }> {
        return request(this.base, "/api/journal");
    }

    validate(): Promise<{ diagnostics: Diagnostic[] }> {
        return request(this.base, "/api/validate");
    }

    gallery(): Promise<{ fixtures: string[] }> {
        return request(this.base, "/api/gallery");
    }

    galleryDocument(name: string): Promise<unknown> {
        return request(this.base, `/api/gallery/${name}`);
    }

    loadGraph(document: unknown): Promise<{ version: number; hash: string }> {
        return request(this.base, "/api/graph", post(document));
    }

    apply(matchId: string, params: Record<string, unknown>,
          version: number): Promise<{ version: number; hash: string }> {
        return request(this.base, "/api/apply",
                       post({ match_id: matchId, params, version }));
    }

    undo(version: number): Promise<{ version: number; hash: string }> {
        return request(this.base, "/api/undo", post({ version }));
    }

    run(inputs: Record<string, unknown>, symbols: Record<string, number>,
        ): Promise<{ report: RunReport }> {
        return request(this.base, "/api/run", post({ inputs, symbols }));
    }

    editNode(payload: { state: string; id: number | string; attribute: string;
                        value: unknown; version: number },
             ): Promise<{ version: number; hash: string }> {
        return request(this.base, "/api/node", post(payload));
    }
}
