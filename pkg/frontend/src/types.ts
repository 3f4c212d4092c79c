// Wire types mirroring the assessment service's JSON documents.

export interface PerImageResult {
  position: number;
  kind: string;
  probability: number | null;
  label: string | null;
  error: string | null;
  image_url: string;
}

export interface ExamSummary {
  exam_id: string;
  submitted_at: number; // epoch seconds
  age: number;
  gender: string;
  verdict: "pd" | "healthy";
  verdict_probability: number;
  model_version: string;
  low_confidence: boolean;
}

export interface ExamDetail extends ExamSummary {
  per_image: PerImageResult[];
}

export interface SessionToken {
  token: string;
  expires_in: number;
}
