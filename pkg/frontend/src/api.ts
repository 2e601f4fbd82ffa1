import { ActionDoc, Choice, HistoryDoc, PreviewDoc, StateDoc, StepDoc } from "./types";

export class ApiError extends Error {
    constructor(public status: number, public detail: string) {
        super(`HTTP ${status}: ${detail}`);
    }
}

/** Thin typed client for the operator HTTP API. */
export class SandshapeApi {
    constructor(private base: string, private fetchFn: typeof fetch = fetch) {}

    private async request<T>(path: string, method: string, body?: unknown): Promise<T> {
        const response = await this.fetchFn(`${this.base}${path}`, {
            method,
            headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
            body: body !== undefined ? JSON.stringify(body) : undefined,
        });
        if (!response.ok) {
            let detail = response.statusText;
            try {
                const doc = await response.json();
                detail = typeof doc.detail === "string" ? doc.detail : JSON.stringify(doc);
            } catch {
                // keep the status text
            }
            throw new ApiError(response.status, detail);
        }
        return response.json() as Promise<T>;
    }

    listScenarios(): Promise<{ builtin: string[] }> {
        return this.request("/scenarios", "GET");
    }

    createSession(scenario: string | object, options: { seed?: number; modelPath?: string } = {}): Promise<{ id: string }> {
        return this.request("/sessions", "POST", {
            scenario,
            seed: options.seed ?? null,
            model_path: options.modelPath ?? null,
        });
    }

    state(id: string): Promise<StateDoc> {
        return this.request(`/sessions/${id}/state`, "GET");
    }

    step(id: string, choice: Choice): Promise<StepDoc> {
        return this.request(`/sessions/${id}/step`, "POST", { choice });
    }

    preview(id: string, action: ActionDoc): Promise<PreviewDoc> {
        return this.request(`/sessions/${id}/preview`, "POST", { action });
    }

    history(id: string): Promise<HistoryDoc> {
        return this.request(`/sessions/${id}/history`, "GET");
    }

    terminate(id: string, reason = "operator"): Promise<{ terminated: boolean; reason: string }> {
        return this.request(`/sessions/${id}/terminate`, "POST", { reason });
    }

    async log(id: string): Promise<string> {
        const response = await this.fetchFn(`${this.base}/sessions/${id}/log`, { method: "GET" });
        if (!response.ok) throw new ApiError(response.status, response.statusText);
        return response.text();
    }
}
