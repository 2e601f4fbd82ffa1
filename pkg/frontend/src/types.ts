export type Choice = "auto" | "tap" | "push-max" | "push-avg" | "push-ann";

export interface ImageDoc {
    width: number;
    height: number;
    data: string; // base64 of the raw row-major 8-bit raster
}

export interface PushAction {
    type: "push";
    start: [number, number];
    end: [number, number];
}

export interface TapAction {
    type: "tap";
    target: [number, number];
}

export type ActionDoc = PushAction | TapAction;
export type Proposal = ActionDoc | { error: string };

export interface RecordDoc {
    k: number;
    choice: string;
    resolved: string | null;
    action: ActionDoc | null;
    e_before: number;
    e_after: number;
    reason: string | null;
    roi: number[] | null;
    contour_current: number[][] | null;
    contour_near: number[][] | null;
    rng_draws: number;
}

export interface StateDoc {
    id: string;
    k: number;
    e: number;
    errors: number[];
    terminated: boolean;
    reason: string | null;
    images: { current: ImageDoc; desired: ImageDoc };
    contours: { current: number[][] | null; desired: number[][] | null };
    proposals: Record<string, Proposal>;
}

export interface StepDoc {
    record: RecordDoc | null;
    k: number;
    e: number;
    terminated: boolean;
    reason: string | null;
}

export interface PreviewDoc {
    image: ImageDoc;
    e: number;
    k: number;
}

export interface HistoryDoc {
    records: RecordDoc[];
    errors: number[];
    terminated: boolean;
    reason: string | null;
}
