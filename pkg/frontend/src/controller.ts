import { ApiError, SandshapeApi } from "./api";
import { ActionDoc, Choice, PreviewDoc, StateDoc } from "./types";

export const KEY_BINDINGS: Record<string, Choice | "terminate"> = {
    t: "tap",
    m: "push-max",
    a: "push-avg",
    n: "push-ann",
    " ": "auto",
    q: "terminate",
};

/**
 * Holds the latest server state for one session and serializes mutating
 * requests: while a step or terminate is in flight, further ones are
 * dropped (so a double click issues exactly one request). Previews are
 * not serialized. The controller never computes errors locally; every
 * number it exposes came verbatim from the server.
 */
export class SessionController {
    state: StateDoc | null = null;
    banner: string | null = null;
    private busy = false;
    private listeners: (() => void)[] = [];

    constructor(private api: SandshapeApi, readonly sessionId: string) {}

    onChange(listener: () => void) {
        this.listeners.push(listener);
    }

    private notify() {
        for (const listener of this.listeners) listener();
    }

    get terminated(): boolean {
        return this.state?.terminated ?? false;
    }

    get mutationInFlight(): boolean {
        return this.busy;
    }

    async refresh(): Promise<void> {
        this.state = await this.api.state(this.sessionId);
        this.notify();
    }

    /** Issue one step; returns false if the click was dropped. */
    async choose(choice: Choice): Promise<boolean> {
        if (this.busy || this.terminated) return false;
        this.busy = true;
        try {
            await this.api.step(this.sessionId, choice);
            this.banner = null;
        } catch (err) {
            if (err instanceof ApiError && err.status === 409) {
                this.banner = "session already terminated on the server";
            } else {
                this.banner = err instanceof Error ? err.message : String(err);
            }
        } finally {
            this.busy = false;
        }
        await this.refresh();
        return true;
    }

    /** What-if rollout; concurrent-safe, never advances the iteration. */
    preview(action: ActionDoc): Promise<PreviewDoc> {
        return this.api.preview(this.sessionId, action);
    }

    async terminate(): Promise<void> {
        if (this.busy) return;
        if (this.terminated) {
            await this.refresh();  // re-entering a finished session is read-only
            return;
        }
        this.busy = true;
        try {
            await this.api.terminate(this.sessionId);
        } finally {
            this.busy = false;
        }
        await this.refresh();
    }

    async handleKey(key: string): Promise<void> {
        const bound = KEY_BINDINGS[key];
        if (bound === undefined) return;
        if (bound === "terminate") {
            await this.terminate();
        } else {
            await this.choose(bound);
        }
    }

    exportLog(): Promise<string> {
        return this.api.log(this.sessionId);
    }
}
