import { ActionDoc, Proposal } from "./types";

export interface Polyline {
    kind: "polyline";
    points: [number, number][];
    color: string;
}

export interface Arrow {
    kind: "arrow";
    from: [number, number];
    to: [number, number];
    color: string;
}

export interface Marker {
    kind: "marker";
    at: [number, number];
    color: string;
}

export type Drawable = Polyline | Arrow | Marker;

export const STRATEGY_COLORS: Record<string, string> = {
    "push-max": "#4ea3ff",
    "push-avg": "#ff6b6b",
    "push-ann": "#ffd166",
    tap: "#9be564",
};

/** Contour points (u, v) as a drawable polyline with point markers. */
export function contourDrawables(points: number[][] | null, color: string): Drawable[] {
    if (!points || points.length === 0) return [];
    const line: Polyline = {
        kind: "polyline",
        points: points.map((p) => [p[0], p[1]] as [number, number]),
        color,
    };
    const dots: Drawable[] = points.map((p) => ({
        kind: "marker",
        at: [p[0], p[1]] as [number, number],
        color,
    }));
    return [line, ...dots];
}

/** One drawable per proposed action: arrows for pushes, markers for taps. */
export function proposalDrawables(proposals: Record<string, Proposal>): Drawable[] {
    const out: Drawable[] = [];
    for (const [name, proposal] of Object.entries(proposals)) {
        if ("error" in proposal) continue;
        out.push(...actionDrawables(proposal, STRATEGY_COLORS[name] ?? "#ffffff"));
    }
    return out;
}

export function actionDrawables(action: ActionDoc, color: string): Drawable[] {
    if (action.type === "push") {
        return [{ kind: "arrow", from: action.start, to: action.end, color }];
    }
    return [{ kind: "marker", at: action.target, color }];
}

/** Error-series polyline scaled into a chart box of the given size. */
export function chartPolyline(errors: number[], width: number, height: number, pad = 8): [number, number][] {
    if (errors.length === 0) return [];
    const top = Math.max(...errors, 1e-9);
    const innerW = width - 2 * pad;
    const innerH = height - 2 * pad;
    const n = Math.max(errors.length - 1, 1);
    return errors.map((e, k) => [
        pad + (innerW * k) / n,
        pad + innerH * (1 - e / top),
    ]);
}
