// Hash routing: the page is a pure function of location.hash.

export type Route =
  | { page: "login" }
  | { page: "submit" }
  | { page: "history" }
  | { page: "exam"; examId: string };

export function parseRoute(hash: string): Route {
  const path = hash.replace(/^#\/?/, "");
  if (path === "" || path === "submit") return { page: "submit" };
  if (path === "login") return { page: "login" };
  if (path === "history") return { page: "history" };
  const exam = path.match(/^exams\/(.+)$/);
  if (exam && exam[1]) return { page: "exam", examId: decodeURIComponent(exam[1]) };
  return { page: "submit" };
}

export function routeHash(route: Route): string {
  switch (route.page) {
    case "exam":
      return `#/exams/${encodeURIComponent(route.examId)}`;
    default:
      return `#/${route.page}`;
  }
}
